//! The exponentially tilted family: reweight a prior by
//! `exp(-a * min(d(x, A), R)^2)` and normalize.
//!
//! All tilting is done in log space with max-subtraction before
//! exponentiation; the tilt parameter reaches 1e6 and beyond in the
//! annealing schedules, where naive exponentials underflow long before the
//! normalized weights become meaningless.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::{pairwise_dot, pairwise_sum};
use crate::sets::ConditioningSet;
use crate::space::MetricMeasureSpace;

/// Largest tilt parameter the bisection will consider. Past this point the
/// boundary layer (width ~ 1/sqrt(a)) is far below any realistic cell size
/// and the grid only returns quantization artifacts.
pub const A_MAX: f64 = 1e8;

/// One member of the tilted family, with its normalization constant.
#[derive(Debug, Clone)]
pub struct TiltedMeasure {
    pub a: f64,
    pub r: f64,
    /// Posterior masses per node; a probability vector.
    pub weights: Vec<f64>,
    /// ln of the normalization constant `C_a` (finite even when `C_a`
    /// underflows as an f64).
    pub log_normalization: f64,
    /// `C_a` itself; 0.0 when it underflows.
    pub normalization: f64,
    /// Truncated squared distances `min(d(x,A), R)^2` per node.
    pub sq_distances: Vec<f64>,
    pub space_ref: String,
    pub set_ref: String,
}

impl TiltedMeasure {
    /// `E[min(d(X,A),R)^2]` under this measure.
    pub fn expected_sq_distance(&self) -> f64 {
        pairwise_dot(&self.weights, &self.sq_distances)
    }

    pub fn as_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure {
            weights: self.weights.clone(),
            total: pairwise_sum(&self.weights),
        }
    }
}

/// Precomputed per-node data for tilting one (prior, set, R) triple at many
/// values of `a`.
pub struct TiltContext {
    pub sq_distances: Vec<f64>,
    pub raw_distances: Vec<f64>,
    log_prior: Vec<f64>,
    min_supported_sq: f64,
    r: f64,
    space_ref: String,
    set_ref: String,
}

impl TiltContext {
    pub fn new(
        space: &MetricMeasureSpace,
        prior: &DiscreteMeasure,
        set: &ConditioningSet,
        r: f64,
    ) -> Result<Self> {
        if r <= 0.0 {
            return Err(Error::Parameter {
                name: "R",
                reason: format!("truncation radius must be positive, got {r}"),
            });
        }
        if prior.len() != space.len() {
            return Err(Error::Alignment(prior.len(), space.len()));
        }
        if (prior.total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter {
                name: "prior",
                reason: format!("prior must be a probability vector, total = {}", prior.total),
            });
        }
        let raw_distances = set.node_distances(space);
        let sq_distances: Vec<f64> = raw_distances
            .iter()
            .map(|&d| {
                let dr = d.min(r);
                dr * dr
            })
            .collect();
        let log_prior: Vec<f64> = prior.weights.iter().map(|&w| w.ln()).collect();
        let min_supported_sq = sq_distances
            .iter()
            .zip(&prior.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&d2, _)| d2)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            sq_distances,
            raw_distances,
            log_prior,
            min_supported_sq,
            r,
            space_ref: space.label.clone(),
            set_ref: set.label.clone(),
        })
    }

    pub fn tilt(&self, a: f64) -> Result<TiltedMeasure> {
        if a < 0.0 || !a.is_finite() {
            return Err(Error::Parameter {
                name: "a",
                reason: format!("tilt parameter must be finite and nonnegative, got {a}"),
            });
        }
        // genuinely degenerate input: every supported node sits at the
        // truncation plateau and the plateau factor itself underflows
        if self.min_supported_sq >= self.r * self.r - 1e-15 && a * self.r * self.r > 700.0 {
            return Err(Error::OverflowGuard { r: self.r, exponent: a * self.r * self.r });
        }
        let mut log_weights: Vec<f64> = self
            .log_prior
            .iter()
            .zip(&self.sq_distances)
            .map(|(&lp, &d2)| lp - a * d2)
            .collect();
        let peak = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::DegeneratePrior);
        }
        for lw in &mut log_weights {
            *lw = (*lw - peak).exp();
        }
        let scale = pairwise_sum(&log_weights);
        let weights: Vec<f64> = log_weights.iter().map(|&w| w / scale).collect();
        let log_normalization = peak + scale.ln();
        Ok(TiltedMeasure {
            a,
            r: self.r,
            weights,
            log_normalization,
            normalization: log_normalization.exp(),
            sq_distances: self.sq_distances.clone(),
            space_ref: self.space_ref.clone(),
            set_ref: self.set_ref.clone(),
        })
    }

    fn expected_sq_at(&self, a: f64) -> Result<f64> {
        Ok(self.tilt(a)?.expected_sq_distance())
    }
}

/// Tilt `prior` toward `set`: weights proportional to
/// `exp(-a * min(d(x,A),R)^2) * prior(x)`.
pub fn tilt(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    a: f64,
    r: f64,
) -> Result<TiltedMeasure> {
    TiltContext::new(space, prior, set, r)?.tilt(a)
}

/// Normalization constants `C_a` along a strictly increasing schedule.
/// For sets with grid mass, the sequence converges to that mass; for null
/// sets it decays like `f_A(0) sqrt(pi) / (2 sqrt(a))`.
pub fn normalization_limit(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    r: f64,
    a_schedule: &[f64],
) -> Result<Vec<f64>> {
    check_schedule(a_schedule, 1)?;
    let ctx = TiltContext::new(space, prior, set, r)?;
    a_schedule.iter().map(|&a| Ok(ctx.tilt(a)?.normalization)).collect()
}

pub(crate) fn check_schedule(a_schedule: &[f64], min_len: usize) -> Result<()> {
    if a_schedule.len() < min_len {
        return Err(Error::Parameter {
            name: "a_schedule",
            reason: format!("schedule needs at least {min_len} entries"),
        });
    }
    if a_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter {
            name: "a_schedule",
            reason: "schedule must be strictly increasing".into(),
        });
    }
    Ok(())
}

/// Result of inverting the constraint level: the tilt parameter whose
/// measure attains `E[d_R^2] = sigma_sq`.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSolve {
    pub a: f64,
    /// Set when `sigma_sq` already holds at `a = 0` (constraint inactive).
    pub inactive: bool,
}

/// Bisection on the strictly decreasing map `a -> E[d_R^2]` under the tilt.
pub fn a_of_sigma(
    space: &MetricMeasureSpace,
    prior: &DiscreteMeasure,
    set: &ConditioningSet,
    r: f64,
    sigma_sq: f64,
) -> Result<SigmaSolve> {
    if sigma_sq <= 0.0 {
        return Err(Error::Parameter {
            name: "sigma_sq",
            reason: format!("target must be positive, got {sigma_sq}"),
        });
    }
    let ctx = TiltContext::new(space, prior, set, r)?;
    let at_prior = ctx.expected_sq_at(0.0)?;
    if sigma_sq >= at_prior {
        return Ok(SigmaSolve { a: 0.0, inactive: true });
    }
    let floor = ctx.expected_sq_at(A_MAX)?;
    if sigma_sq < floor {
        return Err(Error::ResolutionExhausted { requested: sigma_sq, achievable: floor });
    }
    let tol = 1e-6 * sigma_sq;

    // bracket by doubling, then bisect geometrically inside the bracket
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ctx.expected_sq_at(hi)? > sigma_sq {
        lo = hi;
        hi *= 2.0;
        if hi >= A_MAX {
            hi = A_MAX;
            break;
        }
    }
    for _ in 0..200 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let value = ctx.expected_sq_at(mid)?;
        if (value - sigma_sq).abs() <= tol {
            return Ok(SigmaSolve { a: mid, inactive: false });
        }
        if value > sigma_sq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Parameter {
        name: "sigma_sq",
        reason: "bisection failed to meet the relative tolerance".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ConditioningSet;
    use crate::space::{uniform_sphere, SphereMetric};
    use std::f64::consts::PI;

    fn sphere_prior(nphi: usize, ntheta: usize) -> (MetricMeasureSpace, DiscreteMeasure) {
        let space = uniform_sphere(SphereMetric::Geodesic, nphi, ntheta).unwrap();
        let prior = DiscreteMeasure::new(space.weights().to_vec())
            .unwrap()
            .normalized()
            .unwrap();
        (space, prior)
    }

    #[test]
    fn zero_tilt_returns_the_prior() {
        let (space, prior) = sphere_prior(20, 40);
        let tm = tilt(&space, &prior, &ConditioningSet::equator(), 0.0, 1.0).unwrap();
        for (w, p) in tm.weights.iter().zip(&prior.weights) {
            assert!((w - p).abs() < 1e-15);
        }
        assert!((tm.normalization - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whole_space_conditioning_is_a_no_op() {
        let (space, prior) = sphere_prior(20, 40);
        let tm = tilt(&space, &prior, &ConditioningSet::whole_space(), 3000.0, 1.0).unwrap();
        for (w, p) in tm.weights.iter().zip(&prior.weights) {
            assert!((w - p).abs() < 1e-15);
        }
        assert!(tm.expected_sq_distance() == 0.0);
    }

    #[test]
    fn strong_tilt_concentrates_on_the_equator() {
        let (space, prior) = sphere_prior(200, 400);
        let tm = tilt(&space, &prior, &ConditioningSet::equator(), 1e4, 1.0).unwrap();
        let near: Vec<f64> = (0..space.len())
            .filter(|&i| space.node(i)[0].abs() <= 0.05)
            .map(|i| tm.weights[i])
            .collect();
        assert!(pairwise_sum(&near) > 0.99);
    }

    #[test]
    fn log_domain_matches_direct_exponentials_where_they_do_not_underflow() {
        let (space, prior) = sphere_prior(40, 80);
        let set = ConditioningSet::equator();
        let a = 5.0;
        let tm = tilt(&space, &prior, &set, a, 1.0).unwrap();
        let direct: Vec<f64> = prior
            .weights
            .iter()
            .zip(&tm.sq_distances)
            .map(|(&p, &d2)| p * (-a * d2).exp())
            .collect();
        let total = pairwise_sum(&direct);
        for (w, d) in tm.weights.iter().zip(&direct) {
            assert!((w - d / total).abs() < 1e-10);
        }
    }

    #[test]
    fn prior_expected_sq_distance_to_the_equator() {
        // E[phi^2] under cos(phi)/2 d phi on (-pi/2, pi/2) = pi^2/4 - 2,
        // by two integrations by parts
        let (space, prior) = sphere_prior(400, 100);
        let tm = tilt(&space, &prior, &ConditioningSet::equator(), 0.0, 10.0).unwrap();
        let expected = PI * PI / 4.0 - 2.0;
        let got = tm.expected_sq_distance();
        assert!((got - expected).abs() < 1e-3, "got {got}, expected {expected}");
    }

    #[test]
    fn hemisphere_normalization_converges_to_half() {
        let (space, prior) = sphere_prior(200, 400);
        let schedule: Vec<f64> = (0..=12).map(|k| 100.0 * 2f64.powi(k)).collect();
        let c = normalization_limit(&space, &prior, &ConditioningSet::hemisphere(), 1.0, &schedule)
            .unwrap();
        assert!((c.last().unwrap() - 0.5).abs() < 0.01, "C = {:?}", c.last());
        assert!(c.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn whole_space_normalization_is_identically_one() {
        let (space, prior) = sphere_prior(20, 40);
        let c = normalization_limit(
            &space,
            &prior,
            &ConditioningSet::whole_space(),
            1.0,
            &[1.0, 10.0, 100.0, 1000.0],
        )
        .unwrap();
        for v in c {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn null_set_normalization_has_the_laplace_decay_rate() {
        // For the equator, sqrt(a) * C_a converges to the 1-D Laplace integral
        // sqrt(a) * int exp(-a s^2) cos(s) ds over (-pi/2, pi/2) -> sqrt(pi)/2.
        // Oracle: Simpson quadrature of that integral at each checked `a`.
        let (space, prior) = sphere_prior(200, 400);
        let set = ConditioningSet::equator();
        for a in [200.0, 800.0] {
            let c = tilt(&space, &prior, &set, a, 1.0).unwrap().normalization;
            let oracle = {
                let n = 20_000;
                let h = PI / n as f64;
                let f = |s: f64| (-a * s * s).exp() * s.cos();
                let mut acc = f(-PI / 2.0) + f(PI / 2.0);
                for k in 1..n {
                    let s = -PI / 2.0 + k as f64 * h;
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(s);
                }
                acc * h / 3.0 / 2.0 // the measure carries cos(phi)/2 per unit phi
            };
            assert!(
                (a.sqrt() * c - a.sqrt() * oracle).abs() < 1e-3,
                "a = {a}: sqrt(a) C_a = {}, oracle {}",
                a.sqrt() * c,
                a.sqrt() * oracle
            );
            assert!((a.sqrt() * oracle - PI.sqrt() / 2.0).abs() < 2e-3);
        }
    }

    #[test]
    fn expected_sq_distance_strictly_decreases_in_a() {
        let (space, prior) = sphere_prior(60, 120);
        let ctx = TiltContext::new(&space, &prior, &ConditioningSet::equator(), 1.0).unwrap();
        let mut last = f64::INFINITY;
        for a in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let e = ctx.tilt(a).unwrap().expected_sq_distance();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn a_of_sigma_round_trips_and_matches_the_gaussian_width() {
        // Laplace approximation: E[phi^2] ~ 1/(2a); at sigma^2 = 5e-5 the
        // tilt parameter should be ~1e4. Oracle: evaluate the tilted
        // expectation at the predicted a directly.
        let (space, prior) = sphere_prior(400, 100);
        let set = ConditioningSet::equator();
        let ctx = TiltContext::new(&space, &prior, &set, 1.0).unwrap();
        let predicted = ctx.tilt(1e4).unwrap().expected_sq_distance();
        assert!((predicted - 5e-5).abs() < 0.2 * 5e-5, "E(1e4) = {predicted}");

        let solve = a_of_sigma(&space, &prior, &set, 1.0, 5e-5).unwrap();
        assert!(!solve.inactive);
        assert!((solve.a - 1e4).abs() < 0.2 * 1e4, "a = {}", solve.a);
        let round_trip = ctx.tilt(solve.a).unwrap().expected_sq_distance();
        assert!((round_trip - 5e-5).abs() <= 1e-6 * 5e-5 + 1e-18);
    }

    #[test]
    fn inactive_constraint_returns_zero() {
        let (space, prior) = sphere_prior(40, 80);
        let set = ConditioningSet::equator();
        let prior_value = tilt(&space, &prior, &set, 0.0, 1.0)
            .unwrap()
            .expected_sq_distance();
        let solve = a_of_sigma(&space, &prior, &set, 1.0, prior_value * 1.5).unwrap();
        assert_eq!(solve.a, 0.0);
        assert!(solve.inactive);
    }

    #[test]
    fn sub_grid_sigma_reports_resolution_exhaustion() {
        let (space, prior) = sphere_prior(40, 80);
        let err = a_of_sigma(&space, &prior, &ConditioningSet::equator(), 1.0, 1e-12);
        match err {
            Err(Error::ResolutionExhausted { achievable, .. }) => {
                assert!(achievable > 1e-12);
            }
            other => panic!("expected resolution exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn halving_sigma_increases_a() {
        let (space, prior) = sphere_prior(200, 100);
        let set = ConditioningSet::equator();
        let mut sigma_sq = 0.05;
        let mut last_a = 0.0;
        for _ in 0..4 {
            let s = a_of_sigma(&space, &prior, &set, 1.0, sigma_sq).unwrap();
            assert!(s.a > last_a);
            last_a = s.a;
            sigma_sq /= 2.0;
        }
    }

    #[test]
    fn overflow_guard_fires_only_on_the_degenerate_plateau() {
        // all prior mass at distance >= R from the set, with a R^2 huge
        let space = crate::space::finite_line("line", &[0.0, 5.0], &[0.5, 0.5]).unwrap();
        let prior = DiscreteMeasure::probability(vec![0.0, 1.0]).unwrap();
        let set = ConditioningSet::atoms(vec![true, false]);
        let err = tilt(&space, &prior, &set, 1e6, 1.0);
        assert!(matches!(err, Err(Error::OverflowGuard { .. })));
        // same geometry at moderate a is fine
        assert!(tilt(&space, &prior, &set, 10.0, 1.0).is_ok());
    }
}
