//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Operand shapes do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Truncated SVD missed its residual target within the iteration cap.
    /// Carries the best factorization reached.
    #[error("svd non-convergence: residual {residual:e} above target {target:e}")]
    SvdNonConvergence {
        residual: f64,
        target: f64,
        best: Box<crate::linalg::LowRankMat>,
    },

    /// A solver produced a state that violates one of its own invariants.
    #[error("internal invariant violation: {0}")]
    InvariantViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }
}
