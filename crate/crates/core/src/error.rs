use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("degenerate configuration: points {i} and {j} coincide")]
    Degenerate { i: usize, j: usize },

    #[error("could not place point {point} with the requested separation after {attempts} attempts")]
    InitFailure { point: usize, attempts: usize },

    #[error("no admissible pole rotation found; closest approach to a pole is {closest:.3e} rad")]
    Alignment { closest: f64 },

    #[error("point {point} lies within the pole guard band (polar distance {polar_distance:.3e} rad); align the configuration first")]
    AlignmentRequired { point: usize, polar_distance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("conjugate gradient stagnated after {restarts} consecutive restarts at iteration {iteration}")]
    Stagnation { iteration: usize, restarts: usize },

    #[error("Newton polishing did not converge; best gradient norm {best_grad_norm:.3e}")]
    NonConvergence { best_grad_norm: f64, best_params: Vec<f64> },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("fit failure: {message} (condition estimate {condition:.3e})")]
    Fit { message: String, condition: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
