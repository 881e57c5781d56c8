use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("iteration diverged at t = {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: &'static str,
    },

    #[error("quadrature did not converge after {evaluations} evaluations (error estimate {error_estimate:e})")]
    Quadrature {
        evaluations: usize,
        error_estimate: f64,
    },

    #[error("importance-sampling estimate unreliable: effective sample size {ess:.1}")]
    UnreliableEstimate { ess: f64 },

    #[error("operation not supported for the {0} model")]
    UnsupportedModel(&'static str),
}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
