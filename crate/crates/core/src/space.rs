//! Metric-measure spaces as quadrature grids with continuous distance oracles.
//!
//! A space is a midpoint-rule tensor grid over a chart, together with a metric
//! on chart coordinates. Three chart families are supported: Euclidean boxes,
//! Euclidean products with a designated observation axis, and the unit-sphere
//! chart `(phi, theta) in (-pi/2, pi/2) x (-pi, pi]` under either the geodesic
//! metric or the flat map-projection metric with angular wrap-around.
//!
//! Grid nodes are cell midpoints, so they never land exactly on the
//! conditioning sets used elsewhere (`phi = 0`, `theta = 0`, ...); this keeps
//! indicator/distance ties out of the estimators.

use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, wrap_centered};
use std::f64::consts::PI;

/// Chart and metric of a space. The map-projection chart measures angle
/// differences after reduction to the centered interval, so the seam at
/// `theta = +-pi` (and the `phi` period `pi`) wraps to the minimal
/// representative before squaring.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Chart {
    EuclideanBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean box whose `y_axis` coordinate is the observed variable.
    Product { lo: Vec<f64>, hi: Vec<f64>, y_axis: usize },
    SphereGeodesic,
    SphereMap,
}

impl Chart {
    pub fn id(&self) -> &'static str {
        match self {
            Chart::EuclideanBox { .. } => "euclidean_box",
            Chart::Product { .. } => "product",
            Chart::SphereGeodesic => "sphere_geodesic",
            Chart::SphereMap => "sphere_map",
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Chart::SphereGeodesic | Chart::SphereMap)
    }
}

/// Discrete base measure on a chart: nodes, per-node masses, and the metric.
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    pub label: String,
    pub dim: usize,
    pub resolution: Vec<usize>,
    pub chart: Chart,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Unit 3-vectors per node for the sphere charts (fast geodesic oracle).
    embed: Vec<f64>,
}

fn sphere_embed(phi: f64, theta: f64) -> [f64; 3] {
    [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()]
}

/// Great-circle angle via atan2 of cross and dot products. Identical to
/// acos of the dot product but keeps full precision near 0 and pi, where
/// acos loses half the significant digits.
fn geodesic_angle(u: &[f64], v: &[f64]) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    cross.atan2(dot)
}

impl MetricMeasureSpace {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(x.to_vec()));
        }
        let ok = match &self.chart {
            Chart::EuclideanBox { lo, hi } | Chart::Product { lo, hi, .. } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&c, (&l, &h))| c >= l - 1e-9 && c <= h + 1e-9),
            Chart::SphereGeodesic | Chart::SphereMap => {
                x[0] > -PI / 2.0 && x[0] < PI / 2.0 && x[1] > -PI && x[1] <= PI + 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(x.to_vec()))
        }
    }

    /// Metric between two chart points. Sphere points are `(phi, theta)`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        self.check_domain(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.chart {
            Chart::EuclideanBox { .. } | Chart::Product { .. } => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Chart::SphereGeodesic => {
                geodesic_angle(&sphere_embed(x[0], x[1]), &sphere_embed(y[0], y[1]))
            }
            Chart::SphereMap => {
                let dphi = wrap_centered(x[0] - y[0], PI);
                let dtheta = wrap_centered(x[1] - y[1], 2.0 * PI);
                (dphi * dphi + dtheta * dtheta).sqrt()
            }
        }
    }

    /// Metric between two grid nodes, using the cached embedding on spheres.
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        if let Chart::SphereGeodesic = self.chart {
            return geodesic_angle(&self.embed[3 * i..3 * i + 3], &self.embed[3 * j..3 * j + 3]);
        }
        self.distance_unchecked(self.node(i), self.node(j))
    }

    /// Upper bound on the diameter of the chart under its metric.
    pub fn diameter_bound(&self) -> f64 {
        match &self.chart {
            Chart::EuclideanBox { lo, hi } | Chart::Product { lo, hi, .. } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
            Chart::SphereGeodesic => PI,
            Chart::SphereMap => ((PI / 2.0) * (PI / 2.0) + PI * PI).sqrt(),
        }
    }

    /// Observation-axis metric for product spaces: `|y1 - y2|`.
    pub fn factor_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.chart {
            Chart::Product { y_axis, .. } => Ok((x[*y_axis] - y[*y_axis]).abs()),
            _ => Err(Error::NotProductSpace),
        }
    }

    pub fn y_axis(&self) -> Result<usize> {
        match &self.chart {
            Chart::Product { y_axis, .. } => Ok(*y_axis),
            _ => Err(Error::NotProductSpace),
        }
    }

    /// Row/column layout of sphere grids: node index `i_phi * n_theta + j_theta`.
    pub fn sphere_grid(&self) -> Option<(usize, usize)> {
        if self.chart.is_sphere() && self.resolution.len() == 2 {
            Some((self.resolution[0], self.resolution[1]))
        } else {
            None
        }
    }

    /// Per-axis cell widths of the quadrature grid. Finite-atom spaces have
    /// no cells and return zeros.
    pub fn cell_extents(&self) -> Vec<f64> {
        match &self.chart {
            Chart::SphereGeodesic | Chart::SphereMap => {
                vec![PI / self.resolution[0] as f64, 2.0 * PI / self.resolution[1] as f64]
            }
            Chart::EuclideanBox { lo, hi } | Chart::Product { lo, hi, .. } => {
                if self.resolution.iter().product::<usize>() == self.len() {
                    lo.iter()
                        .zip(hi.iter().zip(&self.resolution))
                        .map(|(&l, (&h, &n))| (h - l) / n as f64)
                        .collect()
                } else {
                    vec![0.0; self.dim]
                }
            }
        }
    }
}

/// Clamp a distance at the truncation radius: `min(d, r)`.
pub fn truncate(d: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Parameter {
            name: "R",
            reason: format!("truncation radius must be positive, got {r}"),
        });
    }
    Ok(d.min(r))
}

fn check_resolution(resolution: &[usize]) -> Result<()> {
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::Parameter {
            name: "resolution",
            reason: "need at least 2 cells per axis".into(),
        });
    }
    Ok(())
}

/// Build a midpoint-rule grid for `chart` and weight each node by
/// `density(node) * cell mass`. On spheres the per-cell latitude factor is
/// integrated exactly (`2 sin(dphi/2) cos(phi_i)`), so a unit density yields
/// total weight 1 up to rounding rather than up to midpoint-rule bias.
pub fn discretize<F>(
    label: &str,
    chart: Chart,
    resolution: &[usize],
    density: F,
) -> Result<MetricMeasureSpace>
where
    F: Fn(&[f64]) -> f64,
{
    check_resolution(resolution)?;
    match &chart {
        Chart::SphereGeodesic | Chart::SphereMap => {
            if resolution.len() != 2 {
                return Err(Error::Parameter {
                    name: "resolution",
                    reason: "sphere charts take [n_phi, n_theta]".into(),
                });
            }
            let (nphi, ntheta) = (resolution[0], resolution[1]);
            let (hphi, htheta) = (PI / nphi as f64, 2.0 * PI / ntheta as f64);
            let mut nodes = Vec::with_capacity(nphi * ntheta * 2);
            let mut weights = Vec::with_capacity(nphi * ntheta);
            let mut embed = Vec::with_capacity(nphi * ntheta * 3);
            let band = 2.0 * (hphi / 2.0).sin();
            for i in 0..nphi {
                let phi = -PI / 2.0 + (i as f64 + 0.5) * hphi;
                let cell = band * phi.cos() * htheta / (4.0 * PI);
                for j in 0..ntheta {
                    let theta = -PI + (j as f64 + 0.5) * htheta;
                    let w = density(&[phi, theta]) * cell;
                    if w < 0.0 {
                        return Err(Error::Parameter {
                            name: "density",
                            reason: format!("negative density at ({phi}, {theta})"),
                        });
                    }
                    nodes.push(phi);
                    nodes.push(theta);
                    weights.push(w);
                    embed.extend_from_slice(&sphere_embed(phi, theta));
                }
            }
            if pairwise_sum(&weights) <= 0.0 {
                return Err(Error::DegeneratePrior);
            }
            Ok(MetricMeasureSpace {
                label: label.to_string(),
                dim: 2,
                resolution: resolution.to_vec(),
                chart,
                nodes,
                weights,
                embed,
            })
        }
        Chart::EuclideanBox { lo, hi } | Chart::Product { lo, hi, .. } => {
            let dim = lo.len();
            if hi.len() != dim || resolution.len() != dim {
                return Err(Error::Parameter {
                    name: "resolution",
                    reason: "box bounds and resolution must share the dimension".into(),
                });
            }
            if let Chart::Product { y_axis, .. } = &chart {
                if *y_axis >= dim {
                    return Err(Error::Parameter {
                        name: "y_axis",
                        reason: format!("axis {y_axis} out of range for dim {dim}"),
                    });
                }
            }
            let steps: Vec<f64> = lo
                .iter()
                .zip(hi.iter().zip(resolution))
                .map(|(&l, (&h, &n))| (h - l) / n as f64)
                .collect();
            let cell: f64 = steps.iter().product();
            let total: usize = resolution.iter().product();
            let mut nodes = Vec::with_capacity(total * dim);
            let mut weights = Vec::with_capacity(total);
            let mut idx = vec![0usize; dim];
            let mut point = vec![0.0; dim];
            for _ in 0..total {
                for (d, &k) in idx.iter().enumerate() {
                    point[d] = lo[d] + (k as f64 + 0.5) * steps[d];
                }
                let w = density(&point) * cell;
                if w < 0.0 {
                    return Err(Error::Parameter {
                        name: "density",
                        reason: format!("negative density at {point:?}"),
                    });
                }
                nodes.extend_from_slice(&point);
                weights.push(w);
                // odometer increment, last axis fastest
                for d in (0..dim).rev() {
                    idx[d] += 1;
                    if idx[d] < resolution[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            if pairwise_sum(&weights) <= 0.0 {
                return Err(Error::DegeneratePrior);
            }
            Ok(MetricMeasureSpace {
                label: label.to_string(),
                dim,
                resolution: resolution.to_vec(),
                chart,
                nodes,
                weights,
                embed: Vec::new(),
            })
        }
    }
}

/// Uniform probability measure on the sphere chart.
pub fn uniform_sphere(metric: SphereMetric, nphi: usize, ntheta: usize) -> Result<MetricMeasureSpace> {
    let chart = match metric {
        SphereMetric::Geodesic => Chart::SphereGeodesic,
        SphereMetric::Map => Chart::SphereMap,
    };
    discretize(
        &format!("sphere_{}_{}x{}", chart.id(), nphi, ntheta),
        chart,
        &[nphi, ntheta],
        |_| 1.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SphereMetric {
    Geodesic,
    Map,
}

/// A handful of explicit points on a line, each carrying its own mass.
/// Used for finite-atom problems where no quadrature is involved.
pub fn finite_line(label: &str, positions: &[f64], masses: &[f64]) -> Result<MetricMeasureSpace> {
    if positions.len() != masses.len() || positions.is_empty() {
        return Err(Error::Parameter {
            name: "positions",
            reason: "positions and masses must be non-empty and aligned".into(),
        });
    }
    if masses.iter().any(|&m| m < 0.0) {
        return Err(Error::Parameter {
            name: "masses",
            reason: "masses must be nonnegative".into(),
        });
    }
    let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    Ok(MetricMeasureSpace {
        label: label.to_string(),
        dim: 1,
        resolution: vec![positions.len()],
        chart: Chart::EuclideanBox { lo: vec![lo], hi: vec![hi] },
        nodes: positions.to_vec(),
        weights: masses.to_vec(),
        embed: Vec::new(),
    })
}
