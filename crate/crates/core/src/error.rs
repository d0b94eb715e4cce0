use thiserror::Error;

use crate::apg::SolverTrace;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no exact proximal mapping for the pair ({upper}, {lower})")]
    NonComposableProx { upper: String, lower: String },

    #[error("invalid error-bound parameters: {0}")]
    InvalidErrorBound(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteIterate {
        iteration: usize,
        /// Trace recorded up to (and including) the offending iterate.
        trace: Box<SolverTrace>,
    },

    #[error("invalid strong convexity modulus {mu} (Lipschitz constant {lipschitz})")]
    InvalidStrongConvexity { mu: f64, lipschitz: f64 },

    #[error("invalid penalty ladder: {0}")]
    InvalidLadder(String),

    #[error("the instance has no lower-level optimal value attached")]
    MissingLowerOpt,

    #[error("term `{0}` has no subgradient oracle")]
    UnsupportedTerm(String),

    #[error("starting point is outside the constraint set")]
    InfeasibleStart,

    #[error("no convergence after {iterations} iterations (best value {best_value}, certificate {certificate})")]
    Nonconvergence {
        iterations: usize,
        best_value: f64,
        certificate: f64,
    },

    #[error("relaxed feasibility {target} not reached before gamma exceeded {gamma_limit} (last gap {achieved})")]
    RelaxationUnreachable {
        target: f64,
        achieved: f64,
        gamma_limit: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
