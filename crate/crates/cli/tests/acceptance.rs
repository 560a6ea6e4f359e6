//! Acceptance suite: every top-level criterion at its stated tolerance, one
//! pass/fail line per criterion. Scenario runs use the pinned defaults
//! (200x400 sphere grids, tilt schedule 100 * 2^k for k = 0..=12, R = 1).

use maxpost_cli::scenario::{CheckResult, ExperimentReport};
use maxpost_cli::{config, scenario};
use maxpost_core::*;

fn run(body: &str) -> ExperimentReport {
    let cfg = config::parse_config(body, &[]).unwrap();
    scenario::run_scenario(&cfg).unwrap()
}

fn check<'a>(report: &'a ExperimentReport, name: &str) -> &'a CheckResult {
    report
        .checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no check named {name}"))
}

fn conclude(id: u32, description: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id:>2} [{}] {description}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {id} failed: {detail}");
}

fn gaps_non_increasing(gaps: &[f64]) -> bool {
    gaps.windows(2).all(|w| w[1] <= w[0] + 1e-15)
}

#[test]
fn criterion_01_map_meridian_cosine_density() {
    let report = run("scenario: sphere_map_meridian");
    let density = check(&report, "boundary_density_max_abs_error");
    let passed = density.passed && report.wall_time_seconds <= 120.0;
    conclude(
        1,
        "map metric, meridian pair: density matches cos(phi)/4 per branch within 0.02",
        passed,
        &format!(
            "max abs error {:.2e} (tolerance {:.0e}), wall time {:.1}s",
            density.value, density.threshold, report.wall_time_seconds
        ),
    );
    // trailing diagnostics the annealing run must also satisfy
    let conv = report.convergence.as_ref().unwrap();
    assert!(conv.cauchy, "map meridian annealing should be Cauchy");
    assert!(*conv.mass_outside.last().unwrap() < 0.01);
    let tail = &conv.lp_gaps[conv.lp_gaps.len() - 5..];
    assert!(gaps_non_increasing(tail), "gap tail not monotone: {tail:?}");
}

#[test]
fn criterion_02_map_equator_uniform_density() {
    let report = run("scenario: sphere_map_equator");
    let density = check(&report, "boundary_density_max_abs_error");
    conclude(
        2,
        "map metric, equator: density uniform 1/(2pi) within 0.02",
        density.passed,
        &format!("max abs error {:.2e}", density.value),
    );
    let conv = report.convergence.as_ref().unwrap();
    assert!(conv.cauchy);
    assert!(*conv.mass_outside.last().unwrap() < 0.01);
    let tail = &conv.lp_gaps[conv.lp_gaps.len() - 5..];
    assert!(gaps_non_increasing(tail), "gap tail not monotone: {tail:?}");
}

#[test]
fn criterion_03_geodesic_circles_uniform_and_metric_dependent() {
    let equator = run("scenario: sphere_geodesic_equator");
    let meridian = run("scenario: sphere_geodesic_meridian");
    let e = check(&equator, "boundary_density_max_abs_error");
    let m = check(&meridian, "boundary_density_max_abs_error");

    // the same (prior, set) pair under the map metric has a different limit:
    // compare the numerical meridian densities near phi = 0 across metrics
    let map_meridian = run("scenario: sphere_map_meridian");
    let near_zero = |r: &ExperimentReport| {
        r.reference_comparison
            .cells
            .iter()
            .min_by(|a, b| a.parameter.abs().partial_cmp(&b.parameter.abs()).unwrap())
            .unwrap()
            .numerical
    };
    let split = (near_zero(&map_meridian) - near_zero(&meridian)).abs();
    let passed = e.passed && m.passed && split > 0.05;
    conclude(
        3,
        "geodesic metric: both great circles uniform within 0.02, and the map metric disagrees on the meridian",
        passed,
        &format!(
            "equator err {:.2e}, meridian err {:.2e}, cross-metric density split at phi=0: {:.3}",
            e.value, m.value, split
        ),
    );

    let conv = equator.convergence.as_ref().unwrap();
    assert!(conv.cauchy, "geodesic equator annealing should be Cauchy");
    let tail = &conv.lp_gaps[conv.lp_gaps.len() - 5..];
    assert!(gaps_non_increasing(tail), "gap tail not monotone: {tail:?}");

    // the geodesic meridian run outlives the grid's resolvable layer near the
    // end of the schedule (1/sqrt(a) drops below the cell size around
    // a ~ 1.6e4); the gap sequence must decrease over the resolvable prefix
    // and the escaping mass must still vanish
    let conv = meridian.convergence.as_ref().unwrap();
    assert!(*conv.mass_outside.last().unwrap() < 0.01);
    let cell = std::f64::consts::PI / 200.0;
    let resolvable = conv
        .a_schedule
        .iter()
        .take_while(|&&a| a.sqrt().recip() >= cell / 2.0)
        .count();
    assert!(resolvable >= 5, "schedule should have a resolvable prefix");
    assert!(
        gaps_non_increasing(&conv.lp_gaps[..resolvable - 1]),
        "resolvable-prefix gaps not monotone: {:?}",
        &conv.lp_gaps[..resolvable - 1]
    );
}

#[test]
fn criterion_04_gaussian_product_moments() {
    let report = run("scenario: gaussian_product");
    let mean = check(&report, "posterior_mean_error");
    let variance = check(&report, "posterior_variance_error");
    conclude(
        4,
        "correlated Gaussian row conditioning: mean within 1% of 0.4, variance within 2% of 0.36",
        mean.passed && variance.passed,
        &format!("|mean - 0.4| = {:.2e}, |var - 0.36| = {:.2e}", mean.value, variance.value),
    );
}

#[test]
fn criterion_05_finite_atom_dual_recovery() {
    let report = run("scenario: finite_atoms");
    let err = check(&report, "dual_posterior_max_abs_error");
    let gap = check(&report, "duality_gap");
    conclude(
        5,
        "four-atom dual solve returns (1/3, 2/3, 0, 0) within 1e-10 with duality gap below 1e-8",
        err.passed && gap.passed,
        &format!("posterior error {:.2e}, duality gap {:.2e}", err.value, gap.value),
    );
}

#[test]
fn criterion_06_positive_measure_recovery() {
    let report = run("scenario: positive_measure_recovery");
    let c = check(&report, "normalization_error_at_final_tilt");
    let gap = check(&report, "lp_gap_vs_classical_conditioning");
    conclude(
        6,
        "hemisphere: C_a within 0.01 of 0.5 and annealed limit within LP 0.02 of classical conditioning",
        c.passed && gap.passed,
        &format!("|C_a - 0.5| = {:.2e}, LP gap = {:.2e}", c.value, gap.value),
    );
    let conv = report.convergence.as_ref().unwrap();
    let tail = &conv.lp_gaps[conv.lp_gaps.len() - 5..];
    assert!(gaps_non_increasing(tail), "gap tail not monotone: {tail:?}");
}

#[test]
fn criterion_07_truncation_invariance() {
    let report = run("scenario: truncation_invariance");
    let gap = check(&report, "truncation_lp_gap");
    conclude(
        7,
        "meridian posteriors at R = 1 and R = 2 coincide within LP 0.01 at a = 1e4",
        gap.passed,
        &format!("LP gap = {:.2e}", gap.value),
    );
}

#[test]
fn criterion_08_isometry_invariance() {
    let report = run("scenario: isometry_invariance");
    let gap = check(&report, "isometry_lp_gap");
    conclude(
        8,
        "quarter-turn rotation of the geodesic equator is an exact symmetry (LP gap below 1e-10)",
        gap.passed,
        &format!("LP gap = {:.2e}", gap.value),
    );
}

#[test]
fn criterion_09_delta_convergence_of_the_observation_marginal() {
    let report = run("scenario: gaussian_product");
    let final_e = check(&report, "marginal_sq_distance_final");
    let monotone = check(&report, "marginal_series_monotone");
    let chebyshev = check(&report, "chebyshev_tail_bound");
    conclude(
        9,
        "E[d_Y^2] decays below 1e-4 along the schedule, monotonically, with the Chebyshev tail bound",
        final_e.passed && monotone.passed && chebyshev.passed,
        &format!("final E[d_Y^2] = {:.2e}", final_e.value),
    );
}

#[test]
fn criterion_10_property_suites() {
    // the full randomized suites run as unit tests in the core crate (well
    // under 30 s); this criterion re-exercises each family at reduced size so
    // the acceptance log carries its own line
    let started = std::time::Instant::now();

    // relative entropy positivity
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let xs: Vec<f64> = (0..6).map(|_| rng.gen_range(0.01..1.0)).collect();
            let t: f64 = xs.iter().sum();
            DiscreteMeasure::probability(xs.iter().map(|x| x / t).collect()).unwrap()
        };
        let (mu, nu) = (draw(&mut rng), draw(&mut rng));
        assert!(relative_entropy(&mu, &nu).unwrap() >= -1e-12);
    }

    // tilt normalization and monotone constraint level
    let space = uniform_sphere(SphereMetric::Geodesic, 60, 120).unwrap();
    let prior = DiscreteMeasure::new(space.weights().to_vec())
        .unwrap()
        .normalized()
        .unwrap();
    let set = ConditioningSet::equator();
    let ctx = TiltContext::new(&space, &prior, &set, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for a in [0.0, 5.0, 50.0, 500.0, 5000.0] {
        let tm = ctx.tilt(a).unwrap();
        let total: f64 = tm.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let e = tm.expected_sq_distance();
        assert!(e < last);
        last = e;
    }

    // constraint-level round trip
    let solve = a_of_sigma(&space, &prior, &set, 1.0, 0.01).unwrap();
    let back = ctx.tilt(solve.a).unwrap().expected_sq_distance();
    assert!((back - 0.01).abs() <= 1e-6 * 0.01);

    // dual solver against the closed conditioning form
    let nu = DiscreteMeasure::probability(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let constraints = [
        Constraint::normalization(4),
        Constraint::subset_mass(&[true, true, false, false], 1.0),
    ];
    let sol = solve_dual(&nu, &constraints, &SolverOptions::default()).unwrap();
    assert!(verify_duality(&sol));

    // Lévy–Prokhorov symmetry on a tilted pair
    let params = LpParams::default();
    let m1 = tilt(&space, &prior, &set, 10.0, 1.0).unwrap().as_measure();
    let m2 = tilt(&space, &prior, &set, 100.0, 1.0).unwrap().as_measure();
    let d12 = levy_prokhorov(&space, &m1, &m2, &[&set], &params).unwrap().epsilon;
    let d21 = levy_prokhorov(&space, &m2, &m1, &[&set], &params).unwrap().epsilon;
    assert_eq!(d12, d21);

    let elapsed = started.elapsed().as_secs_f64();
    conclude(
        10,
        "property suites (entropy positivity, tilt normalization, monotonicity, round trip, duality, LP symmetry)",
        elapsed < 30.0,
        &format!("reduced-size sweep in {elapsed:.1}s; full suites run in the core crate's tests"),
    );
}
