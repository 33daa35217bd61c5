use thiserror::Error;

/// Errors raised by the solvers, oracles and instance loader.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("dual certificate failed: {0}")]
    NumericalDuality(String),

    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NonConvergence { iterations: usize, best_residual: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: usize, got: usize, context: &str) -> Error {
    Error::DimensionMismatch {
        expected,
        got,
        context: context.to_string(),
    }
}
