use thiserror::Error;

/// Crate-wide error type. Each variant maps to a stable machine-readable
/// code used in CLI output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("oracle inconsistent: {0}")]
    OracleInconsistent(String),
    #[error("pruning budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unreliable estimate: {0}")]
    UnreliableEstimate(String),
    #[error("insufficient scales: {0}")]
    InsufficientScales(String),
}

impl Error {
    /// Stable identifier for machine-readable error reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InsufficientDepth(_) => "insufficient-depth",
            Error::UnsupportedModel(_) => "unsupported-model",
            Error::Numeric(_) => "numeric",
            Error::OracleInconsistent(_) => "oracle-inconsistent",
            Error::BudgetExceeded(_) => "budget-exceeded",
            Error::UnreliableEstimate(_) => "unreliable-estimate",
            Error::InsufficientScales(_) => "insufficient-scales",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
