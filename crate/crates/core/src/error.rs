use thiserror::Error;

/// Errors raised anywhere in the mesh / element / solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),

    #[error("linear solve failed ({what}): relative residual {residual:e}")]
    SolverFailure { what: String, residual: f64 },

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
