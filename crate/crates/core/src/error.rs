use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "integration did not converge after {levels} refinement levels \
         (last two estimates {previous:e} and {current:e}, tolerance {tolerance:e})"
    )]
    IntegrationNotConverged {
        levels: usize,
        previous: f64,
        current: f64,
        tolerance: f64,
    },

    #[error("states are numerically parallel (1 - c^2 = {0:e})")]
    DegenerateSpan(f64),

    #[error("local shift coefficient vanishes (|a| = {0:e})")]
    DegenerateCoefficient(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("at least {required} Monte Carlo replicates are required, got {got}")]
    InsufficientReplicates { required: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
