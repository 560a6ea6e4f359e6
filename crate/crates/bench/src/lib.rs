//! Shared fixtures for the pipeline benchmarks.

use maxpost_core::*;

pub fn sphere_fixture(
    metric: SphereMetric,
    nphi: usize,
    ntheta: usize,
) -> (MetricMeasureSpace, DiscreteMeasure) {
    let space = uniform_sphere(metric, nphi, ntheta).expect("sphere grid");
    let prior = DiscreteMeasure::new(space.weights().to_vec())
        .expect("weights")
        .normalized()
        .expect("normalizable");
    (space, prior)
}
