use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported dimension {0}: the walk must be transient (d >= 3)")]
    UnsupportedDimension(usize),

    #[error("numerical failure: {reason} (condition estimate {condition:e})")]
    NumericalFailure { reason: String, condition: f64 },

    #[error("conditioned walk exceeded its budget of {budget} steps")]
    BudgetExceeded { budget: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cache file: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
