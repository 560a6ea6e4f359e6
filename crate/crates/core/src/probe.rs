//! Seeded randomized diagnostics: metric axioms on sampled node triples and
//! the 1-Lipschitz property of distance-to-set oracles on sampled pairs.

use crate::sets::ConditioningSet;
use crate::space::MetricMeasureSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    pub triples: usize,
    pub max_symmetry_violation: f64,
    pub max_triangle_violation: f64,
    pub max_identity_violation: f64,
    pub pairs: usize,
    pub max_lipschitz_violation: f64,
    pub lipschitz_constant: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Check metric axioms on `triples` random node triples and, when a set is
/// given, the Lipschitz bound `|d(x,A) - d(y,A)| <= L d(x,y)` on as many
/// random pairs. `lipschitz_constant` is 1 for every built-in oracle except
/// the geodesic meridian-pair closed form, whose chart gradient reaches
/// sqrt(1 + (pi/2)^2) near the poles; callers pass the constant that matches
/// their oracle.
pub fn probe_metric_axioms(
    space: &MetricMeasureSpace,
    set: Option<&ConditioningSet>,
    lipschitz_constant: f64,
    seed: u64,
    triples: usize,
    tolerance: f64,
) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.len();
    let mut max_symmetry: f64 = 0.0;
    let mut max_triangle: f64 = 0.0;
    let mut max_identity: f64 = 0.0;
    for _ in 0..triples {
        let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let dij = space.node_distance(i, j);
        let dji = space.node_distance(j, i);
        let djk = space.node_distance(j, k);
        let dik = space.node_distance(i, k);
        max_symmetry = max_symmetry.max((dij - dji).abs());
        max_triangle = max_triangle.max(dik - (dij + djk));
        max_identity = max_identity.max(space.node_distance(i, i).abs());
        debug_assert!(dij >= 0.0);
    }
    let mut max_lipschitz: f64 = 0.0;
    let mut pairs = 0;
    if let Some(set) = set {
        pairs = triples;
        for _ in 0..pairs {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let da = set.set_distance(space, space.node(i));
            let db = set.set_distance(space, space.node(j));
            let excess = (da - db).abs() - lipschitz_constant * space.node_distance(i, j);
            max_lipschitz = max_lipschitz.max(excess);
        }
    }
    let passed = max_symmetry <= tolerance
        && max_triangle <= tolerance
        && max_identity <= tolerance
        && max_lipschitz <= tolerance;
    ProbeReport {
        triples,
        max_symmetry_violation: max_symmetry,
        max_triangle_violation: max_triangle,
        max_identity_violation: max_identity,
        pairs,
        max_lipschitz_violation: max_lipschitz,
        lipschitz_constant,
        tolerance,
        passed,
    }
}
