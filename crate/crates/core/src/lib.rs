//! Numerical machinery for posteriors conditioned on sets the prior gives
//! zero mass.
//!
//! The pipeline: represent a metric-measure space as a quadrature grid with
//! a continuous distance oracle ([`space`]), describe the conditioning set
//! through distance and indicator oracles ([`sets`]), tilt the prior by
//! `exp(-a * min(d(x,A),R)^2)` along an increasing schedule ([`tilt`]),
//! watch the family converge in the Lévy–Prokhorov sense ([`prokhorov`],
//! [`anneal`]), and read the limit density off the prior's boundary layer
//! ([`boundary`]). Closed forms for the cases with known answers live in
//! [`reference`]; the entropy-minimization view of the same construction is
//! checked at small scale by the dual solver in [`dual`].

pub mod anneal;
pub mod boundary;
pub mod dual;
pub mod error;
pub mod measure;
pub mod numeric;
pub mod probe;
pub mod prokhorov;
pub mod reference;
pub mod sets;
pub mod space;
pub mod tilt;

pub use anneal::{
    anneal, isometry_invariance_gap, marginal_delta_check, pushforward, transform_set,
    truncation_invariance_gap, AnnealOptions, AnnealOutcome, ConvergenceReport, DeltaReport,
    GridIsometry,
};
pub use boundary::{boundary_density, default_eta_steps, BoundaryDensity, ProbeCells};
pub use dual::{solve_dual, verify_duality, Constraint, DualSolution, SolverOptions};
pub use error::{Error, Result};
pub use measure::{relative_entropy, DiscreteMeasure};
pub use probe::{probe_metric_axioms, ProbeReport};
pub use prokhorov::{default_eps_grid, levy_prokhorov, LpEstimate, LpFamily, LpParams};
pub use reference::{
    conditional_positive, product_posterior, ratio_limit_conditional, sphere_reference,
    GreatCircle, RefKind, ReferencePosterior,
};
pub use sets::{enlarge, ConditioningSet};
pub use space::{
    discretize, finite_line, truncate, uniform_sphere, Chart, MetricMeasureSpace, SphereMetric,
};
pub use tilt::{a_of_sigma, normalization_limit, tilt, SigmaSolve, TiltContext, TiltedMeasure, A_MAX};
