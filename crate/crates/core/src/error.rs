//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two paths or grids that must align do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A computation produced a non-finite value.
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    /// A required precondition (e.g. a Hoelder certificate) does not hold.
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    /// A parameter sweep ran out of candidates before meeting its target.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Configuration error, annotated with the offending key.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
