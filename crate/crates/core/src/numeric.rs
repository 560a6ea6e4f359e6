//! Deterministic floating-point reductions.
//!
//! Every mass total in the crate goes through [`pairwise_sum`] so that results
//! do not depend on chunking or thread count. Pairwise splitting keeps the
//! rounding error at O(log n * eps) instead of O(n * eps) for naive
//! accumulation, which matters for the 1e-12 normalization invariants.

/// Sum a slice with a fixed, input-order-only reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Weighted dot product with the same deterministic reduction tree.
pub fn pairwise_dot(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() <= 16 {
        let mut acc = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            acc += x * y;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_dot(&xs[..mid], &ys[..mid]) + pairwise_dot(&xs[mid..], &ys[mid..])
}

/// Reduce `x` modulo `period` to the representative in `(-period/2, period/2]`.
pub fn wrap_centered(x: f64, period: f64) -> f64 {
    let mut r = x.rem_euclid(period);
    if r > period / 2.0 {
        r -= period;
    }
    r
}
