use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("factorization failed: pivot {pivot} is singular to working precision")]
    Factorization { pivot: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid preconditioner: {0}")]
    InvalidPreconditioner(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("problem generation failed: {0}")]
    Generation(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(what: impl Into<String>) -> Error {
    Error::DimensionMismatch(what.into())
}
