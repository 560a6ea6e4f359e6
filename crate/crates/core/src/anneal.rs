//! Annealing diagnostics: run the tilted family along an increasing
//! schedule, track normalization constants, constraint levels, consecutive
//! Lévy–Prokhorov gaps and the mass escaping the set's neighborhood, and
//! extract the limit posterior.
//!
//! Also hosts the two invariance checks (truncation radius, grid-compatible
//! measure-preserving isometries) and the marginal delta-convergence check
//! for product-space observations.

use crate::boundary::{boundary_density, BoundaryDensity, ProbeCells};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::{pairwise_sum, wrap_centered};
use crate::prokhorov::{levy_prokhorov, LpEstimate, LpFamily, LpParams};
use crate::sets::ConditioningSet;
use crate::space::{Chart, MetricMeasureSpace};
use crate::tilt::{check_schedule, TiltContext, TiltedMeasure};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct AnnealOptions {
    pub r: f64,
    pub a_schedule: Vec<f64>,
    /// Cauchy verdict threshold on the trailing Lévy–Prokhorov gaps.
    pub tolerance: f64,
    /// Squared-distance threshold for the escaping-mass diagnostic
    /// (`mass_outside` reports the tilted mass at `d^2 >` this value).
    pub outside_eta_sq: f64,
    pub lp: LpParams,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            r: 1.0,
            a_schedule: (0..=12).map(|k| 100.0 * 2f64.powi(k)).collect(),
            tolerance: 0.02,
            outside_eta_sq: 1e-2,
            lp: LpParams::default(),
        }
    }
}

/// Weak-convergence diagnostics for one annealing run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub a_schedule: Vec<f64>,
    pub normalization: Vec<f64>,
    pub expected_sq_distance: Vec<f64>,
    /// Gap estimates between consecutive schedule entries.
    pub lp_gaps: Vec<f64>,
    pub lp_lower_bounds: Vec<f64>,
    /// Last three gaps all within tolerance.
    pub cauchy: bool,
    /// Some gap estimate saturated its epsilon grid.
    pub saturated: bool,
    pub mass_outside: Vec<f64>,
    pub outside_eta_sq: f64,
    /// "boundary_density" for null sets, "tilted" when the set carries grid
    /// mass and the last tilted measure is the limit.
    pub limit_kind: String,
    pub limit_posterior: Option<BoundaryDensity>,
    /// The gap estimator's restricted test family, for the record.
    pub family_note: String,
}

pub struct AnnealOutcome {
    pub report: ConvergenceReport,
    pub final_measure: TiltedMeasure,
}

/// Run the schedule and assemble the convergence report.
pub fn anneal(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    cells: Option<&ProbeCells>,
    eta_steps: &[f64],
    options: &AnnealOptions,
) -> Result<AnnealOutcome> {
    check_schedule(&options.a_schedule, 4)?;
    let ctx = TiltContext::new(space, prior, set, options.r)?;
    let family = LpFamily::new(space, &[set], &options.lp)?;

    let mut normalization = Vec::with_capacity(options.a_schedule.len());
    let mut expected = Vec::with_capacity(options.a_schedule.len());
    let mut mass_outside = Vec::with_capacity(options.a_schedule.len());
    let mut lp_gaps = Vec::new();
    let mut lp_lower = Vec::new();
    let mut saturated = false;
    let mut previous: Option<TiltedMeasure> = None;

    for &a in &options.a_schedule {
        let tm = ctx.tilt(a)?;
        normalization.push(tm.normalization);
        expected.push(tm.expected_sq_distance());
        let outside: Vec<f64> = ctx
            .raw_distances
            .iter()
            .zip(&tm.weights)
            .map(|(&d, &w)| if d * d > options.outside_eta_sq { w } else { 0.0 })
            .collect();
        mass_outside.push(pairwise_sum(&outside));
        if let Some(prev) = &previous {
            let gap = family.estimate(&prev.as_measure(), &tm.as_measure())?;
            saturated |= gap.saturated;
            lp_gaps.push(gap.epsilon);
            lp_lower.push(gap.lower_bound);
        }
        previous = Some(tm);
    }
    let final_measure = previous.expect("schedule is non-empty");

    let cauchy = lp_gaps.len() >= 3
        && lp_gaps[lp_gaps.len() - 3..]
            .iter()
            .all(|&g| g <= options.tolerance);

    let grid_mass = set.grid_mass(space);
    let limit_kind = if grid_mass > 0.0 { "tilted" } else { "boundary_density" };
    let limit_posterior = match cells {
        Some(cells) => Some(boundary_density(space, prior, set, cells, eta_steps)?),
        None => None,
    };

    Ok(AnnealOutcome {
        report: ConvergenceReport {
            a_schedule: options.a_schedule.clone(),
            normalization,
            expected_sq_distance: expected,
            lp_gaps,
            lp_lower_bounds: lp_lower,
            cauchy,
            saturated,
            mass_outside,
            outside_eta_sq: options.outside_eta_sq,
            limit_kind: limit_kind.into(),
            limit_posterior,
            family_note: format!(
                "Levy-Prokhorov gaps are upper-bound estimates over metric balls at up to {} \
                 stratified nodes plus enlargements of '{}'",
                options.lp.max_centers, set.label
            ),
        },
        final_measure,
    })
}

/// Delta-convergence of the observation marginal in a product space.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DeltaReport {
    /// `E[min(d_Y(Y, y_hat), R)^2]` along the schedule.
    pub series: Vec<f64>,
    /// Series dropped below the tolerance at the end of the schedule.
    pub converged: bool,
    /// Strictly decreasing until it bottoms out at the grid floor.
    pub monotone: bool,
    /// Tail mass `mu_a(d_Y > radius)` together with its Chebyshev bound
    /// `E[d_Y^2]/radius^2`, per schedule entry.
    pub chebyshev: Vec<(f64, f64)>,
    pub chebyshev_radius: f64,
    pub chebyshev_ok: bool,
}

pub fn marginal_delta_check(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    y_hat: f64,
    r: f64,
    a_schedule: &[f64],
    tolerance: f64,
) -> Result<DeltaReport> {
    space.y_axis()?; // product spaces only
    check_schedule(a_schedule, 1)?;
    let set = ConditioningSet::product_row(y_hat);
    let ctx = TiltContext::new(space, prior, &set, r)?;
    let radius = 0.1;
    let mut series = Vec::with_capacity(a_schedule.len());
    let mut chebyshev = Vec::with_capacity(a_schedule.len());
    for &a in a_schedule {
        let tm = ctx.tilt(a)?;
        let e = tm.expected_sq_distance();
        series.push(e);
        let tail: Vec<f64> = ctx
            .raw_distances
            .iter()
            .zip(&tm.weights)
            .map(|(&d, &w)| if d > radius { w } else { 0.0 })
            .collect();
        chebyshev.push((pairwise_sum(&tail), e / (radius * radius)));
    }
    let converged = series.last().is_some_and(|&e| e < tolerance);
    let monotone = series
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= 1e-12 && w[1] <= 1e-12));
    let chebyshev_ok = chebyshev.iter().all(|&(tail, bound)| tail <= bound + 1e-12);
    Ok(DeltaReport { series, converged, monotone, chebyshev, chebyshev_radius: radius, chebyshev_ok })
}

/// Gap between the tilted measures at two truncation radii, at a common `a`.
/// Both radii must exceed the boundary-layer scale `1/sqrt(a)` for the gap
/// to be meaningful.
pub fn truncation_invariance_gap(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    r1: f64,
    r2: f64,
    a: f64,
    lp: &LpParams,
) -> Result<LpEstimate> {
    let m1 = crate::tilt::tilt(space, prior, set, a, r1)?;
    let m2 = crate::tilt::tilt(space, prior, set, a, r2)?;
    levy_prokhorov(space, &m1.as_measure(), &m2.as_measure(), &[set], lp)
}

/// Grid-compatible measure-preserving isometries: node permutations that
/// leave the weight vector unchanged.
#[derive(Debug, Clone, Copy)]
pub enum GridIsometry {
    /// Rotate the sphere chart by a whole number of theta cells.
    ThetaRotation { cells: usize },
    /// Reflect one axis of a box that is symmetric about 0 on that axis.
    AxisReflection { axis: usize },
}

impl GridIsometry {
    /// Node permutation: entry `i` is the index of the image of node `i`.
    pub fn permutation(&self, space: &MetricMeasureSpace) -> Result<Vec<usize>> {
        let perm = match *self {
            GridIsometry::ThetaRotation { cells } => {
                let (nphi, ntheta) = space.sphere_grid().ok_or_else(|| {
                    Error::IncompatibleTransform("theta rotation needs a sphere grid".into())
                })?;
                if !matches!(space.chart, Chart::SphereGeodesic) {
                    return Err(Error::IncompatibleTransform(
                        "theta rotation is an isometry of the geodesic metric only".into(),
                    ));
                }
                let mut perm = Vec::with_capacity(space.len());
                for i in 0..nphi {
                    for j in 0..ntheta {
                        perm.push(i * ntheta + (j + cells) % ntheta);
                    }
                }
                perm
            }
            GridIsometry::AxisReflection { axis } => match &space.chart {
                Chart::EuclideanBox { lo, hi } | Chart::Product { lo, hi, .. } => {
                    if axis >= space.dim {
                        return Err(Error::IncompatibleTransform(format!(
                            "axis {axis} out of range"
                        )));
                    }
                    if (lo[axis] + hi[axis]).abs() > 1e-12 {
                        return Err(Error::IncompatibleTransform(
                            "reflection axis must be symmetric about 0".into(),
                        ));
                    }
                    let res = &space.resolution;
                    let mut strides = vec![1usize; space.dim];
                    for d in (0..space.dim - 1).rev() {
                        strides[d] = strides[d + 1] * res[d + 1];
                    }
                    (0..space.len())
                        .map(|i| {
                            let k = (i / strides[axis]) % res[axis];
                            let flipped = res[axis] - 1 - k;
                            let shift = (flipped as isize - k as isize)
                                * strides[axis] as isize;
                            (i as isize + shift) as usize
                        })
                        .collect()
                }
                _ => {
                    return Err(Error::IncompatibleTransform(
                        "axis reflection needs a box chart".into(),
                    ))
                }
            },
        };
        // measure preservation
        for (i, &p) in perm.iter().enumerate() {
            if (space.weights()[i] - space.weights()[p]).abs() > 1e-12 {
                return Err(Error::IncompatibleTransform(
                    "node weights are not preserved by the transform".into(),
                ));
            }
        }
        Ok(perm)
    }

    /// Inverse transform on chart coordinates.
    pub fn inverse_point(&self, space: &MetricMeasureSpace, x: &[f64]) -> Vec<f64> {
        match *self {
            GridIsometry::ThetaRotation { cells } => {
                let (_, ntheta) = space.sphere_grid().unwrap_or((1, 1));
                let step = 2.0 * PI / ntheta as f64;
                let theta = wrap_centered(x[1] - cells as f64 * step - PI, 2.0 * PI) + PI;
                vec![x[0], if theta > PI { theta - 2.0 * PI } else { theta }]
            }
            GridIsometry::AxisReflection { axis } => {
                let mut y = x.to_vec();
                y[axis] = -y[axis];
                y
            }
        }
    }
}

/// Image measure under a node permutation.
pub fn pushforward(weights: &[f64], permutation: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    for (i, &p) in permutation.iter().enumerate() {
        out[p] = weights[i];
    }
    out
}

/// The image set `h(A)`: its distance oracle pulls points back through the
/// inverse map, exactly as the pushforward relation requires.
pub fn transform_set(set: &ConditioningSet, iso: GridIsometry) -> ConditioningSet {
    let inner = set.clone();
    let inner_ind = set.clone();
    ConditioningSet::custom(
        &format!("transformed_{}", set.label),
        Arc::new(move |space: &MetricMeasureSpace, x: &[f64]| {
            inner.set_distance(space, &iso.inverse_point(space, x))
        }),
        Arc::new(move |space: &MetricMeasureSpace, x: &[f64]| {
            inner_ind.indicator(space, &iso.inverse_point(space, x))
        }),
    )
}

/// Compare the pushforward of the tilted measure with the tilted measure of
/// the transformed set.
pub fn isometry_invariance_gap(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    iso: GridIsometry,
    a: f64,
    r: f64,
    lp: &LpParams,
) -> Result<LpEstimate> {
    let perm = iso.permutation(space)?;
    let tm = crate::tilt::tilt(space, prior, set, a, r)?;
    let pushed = DiscreteMeasure::new(pushforward(&tm.weights, &perm))?;
    let image_set = transform_set(set, iso);
    let image_tm = crate::tilt::tilt(space, prior, &image_set, a, r)?;
    levy_prokhorov(space, &pushed, &image_tm.as_measure(), &[set], lp)
}
