use thiserror::Error;

/// Errors surfaced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinates {0:?} outside the chart domain")]
    Domain(Vec<f64>),

    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("measures are not aligned: {0} nodes vs {1}")]
    Alignment(usize, usize),

    #[error("discretization produced zero total mass (degenerate prior)")]
    DegeneratePrior,

    #[error("dual ascent did not converge after {iterations} iterations (max residual {max_residual:.3e})")]
    SolverStalled {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("constraints appear infeasible: residuals stagnated at {max_residual:.3e}")]
    Infeasible {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error(
        "tilt normalization underflows: all prior mass sits at truncated distance {r} with a*R^2 = {exponent:.1}; \
         use a smaller tilt parameter or a larger truncation radius"
    )]
    OverflowGuard { r: f64, exponent: f64 },

    #[error(
        "target sigma^2 = {requested:.3e} below the grid floor; smallest achievable on this grid is {achievable:.3e}"
    )]
    ResolutionExhausted { requested: f64, achievable: f64 },

    #[error("conditioning set violates the support hypothesis: {0}")]
    SupportViolation(String),

    #[error("set has null measure on the grid; use the annealed path instead of direct conditioning")]
    NullMeasureSet,

    #[error("operation requires a product space with a designated observation axis")]
    NotProductSpace,

    #[error("transform is not grid-compatible: {0}")]
    IncompatibleTransform(String),
}

pub type Result<T> = std::result::Result<T, Error>;
