//! Closed conditioning sets, given through distance-to-set and indicator
//! oracles.
//!
//! The built-in sets carry exact analytic distances:
//!
//! * equator `{phi = 0}`: `|phi|` under both sphere metrics;
//! * meridian pair `{theta = 0} u {theta = pi}`: `min(|theta|, pi - |theta|) * cos(phi)`
//!   under the geodesic metric, `min(|theta|, |pi - theta|, |pi + theta|)`
//!   under the map metric;
//! * hemisphere `{phi >= 0}`: `max(0, -phi)`;
//! * product row `{y = y_hat}`: `|y - y_hat|` in the observation coordinate.

use crate::error::{Error, Result};
use crate::space::{Chart, MetricMeasureSpace};
use std::f64::consts::PI;
use std::sync::Arc;

type DistFn = Arc<dyn Fn(&MetricMeasureSpace, &[f64]) -> f64 + Send + Sync>;
type IndFn = Arc<dyn Fn(&MetricMeasureSpace, &[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
enum SetKind {
    Equator,
    MeridianPair,
    Hemisphere,
    ProductRow { y_hat: f64 },
    /// `{|phi| <= half_width}` band on the sphere chart.
    PhiBand { half_width: f64 },
    /// `{x[axis] <= threshold}` in a Euclidean chart.
    HalfSpace { axis: usize, threshold: f64 },
    /// Explicit member nodes of a finite space.
    Atoms { members: Arc<Vec<bool>> },
    WholeSpace,
    Custom { dist: DistFn, ind: IndFn },
}

/// A closed subset of a space, seen only through its oracles.
#[derive(Clone)]
pub struct ConditioningSet {
    pub label: String,
    kind: SetKind,
}

impl std::fmt::Debug for ConditioningSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ConditioningSet({})", self.label)
    }
}

const ON_SET_TOL: f64 = 1e-12;

impl ConditioningSet {
    pub fn equator() -> Self {
        Self { label: "equator".into(), kind: SetKind::Equator }
    }

    pub fn meridian_pair() -> Self {
        Self { label: "meridian_pair".into(), kind: SetKind::MeridianPair }
    }

    pub fn hemisphere() -> Self {
        Self { label: "hemisphere".into(), kind: SetKind::Hemisphere }
    }

    pub fn product_row(y_hat: f64) -> Self {
        Self { label: format!("row_y={y_hat}"), kind: SetKind::ProductRow { y_hat } }
    }

    pub fn phi_band(half_width: f64) -> Self {
        Self {
            label: format!("band_|phi|<={half_width}"),
            kind: SetKind::PhiBand { half_width },
        }
    }

    pub fn half_space(axis: usize, threshold: f64) -> Self {
        Self {
            label: format!("half_x{axis}<={threshold}"),
            kind: SetKind::HalfSpace { axis, threshold },
        }
    }

    pub fn atoms(members: Vec<bool>) -> Self {
        Self { label: "atoms".into(), kind: SetKind::Atoms { members: Arc::new(members) } }
    }

    pub fn whole_space() -> Self {
        Self { label: "whole_space".into(), kind: SetKind::WholeSpace }
    }

    pub fn custom(label: &str, dist: DistFn, ind: IndFn) -> Self {
        Self { label: label.into(), kind: SetKind::Custom { dist, ind } }
    }

    /// Distance from a chart point to the set under the space's metric.
    pub fn set_distance(&self, space: &MetricMeasureSpace, x: &[f64]) -> f64 {
        match &self.kind {
            SetKind::Equator => x[0].abs(),
            SetKind::MeridianPair => {
                let m = x[1].abs().min((PI - x[1].abs()).abs());
                match space.chart {
                    Chart::SphereGeodesic => m * x[0].cos(),
                    _ => x[1].abs().min((PI - x[1]).abs()).min((PI + x[1]).abs()),
                }
            }
            SetKind::Hemisphere => {
                // under the map metric the phi period is pi, so points near
                // the south pole wrap close to the set's far edge
                let below = (-x[0]).max(0.0);
                match space.chart {
                    Chart::SphereMap => below.min(PI / 2.0 - below),
                    _ => below,
                }
            }
            SetKind::ProductRow { y_hat } => {
                let axis = space.y_axis().unwrap_or(x.len() - 1);
                (x[axis] - y_hat).abs()
            }
            SetKind::PhiBand { half_width } => (x[0].abs() - half_width).max(0.0),
            SetKind::HalfSpace { axis, threshold } => (x[*axis] - threshold).max(0.0),
            SetKind::Atoms { members } => {
                let mut best = f64::INFINITY;
                for (i, &m) in members.iter().enumerate() {
                    if m {
                        best = best.min(space.distance_unchecked(x, space.node(i)));
                    }
                }
                best
            }
            SetKind::WholeSpace => 0.0,
            SetKind::Custom { dist, .. } => dist(space, x),
        }
    }

    /// Membership oracle.
    pub fn indicator(&self, space: &MetricMeasureSpace, x: &[f64]) -> bool {
        match &self.kind {
            SetKind::Hemisphere => x[0] >= 0.0,
            SetKind::HalfSpace { axis, threshold } => x[*axis] <= *threshold,
            SetKind::PhiBand { half_width } => x[0].abs() <= *half_width,
            SetKind::WholeSpace => true,
            SetKind::Custom { ind, .. } => ind(space, x),
            _ => self.set_distance(space, x) <= ON_SET_TOL,
        }
    }

    /// Distance from every grid node to the set.
    pub fn node_distances(&self, space: &MetricMeasureSpace) -> Vec<f64> {
        (0..space.len())
            .map(|i| self.set_distance(space, space.node(i)))
            .collect()
    }

    /// Base-measure mass the set carries on the grid: the sum of node weights
    /// with a positive indicator. Null sets (equator, meridian, interior rows
    /// offset from the grid) return 0 because midpoint nodes never lie on them.
    pub fn grid_mass(&self, space: &MetricMeasureSpace) -> f64 {
        let mut members: Vec<f64> = Vec::new();
        for i in 0..space.len() {
            if self.indicator(space, space.node(i)) {
                members.push(space.weights()[i]);
            }
        }
        crate::numeric::pairwise_sum(&members)
    }
}

/// Boolean mask of nodes with squared set distance at most `eta`
/// (the threshold is compared against `d(x, A)^2`, not `d(x, A)`).
pub fn enlarge(
    space: &MetricMeasureSpace,
    set: &ConditioningSet,
    eta: f64,
) -> Result<Vec<bool>> {
    if eta <= 0.0 {
        return Err(Error::Parameter {
            name: "eta",
            reason: format!("enlargement threshold must be positive, got {eta}"),
        });
    }
    Ok((0..space.len())
        .map(|i| {
            let d = self_distance(space, set, i);
            d * d <= eta
        })
        .collect())
}

fn self_distance(space: &MetricMeasureSpace, set: &ConditioningSet, i: usize) -> f64 {
    set.set_distance(space, space.node(i))
}
