use thiserror::Error;

/// Errors shared by every analysis in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates the precondition of the requested operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The request would exceed a configured size cap (vertices, states, levels).
    #[error("{what}: requested {requested} exceeds cap {cap}")]
    ResourceCap {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    /// An iterative solver stopped before reaching its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Not enough data for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The quantity is mathematically undefined for these inputs.
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
