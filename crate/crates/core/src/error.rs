use thiserror::Error;

/// Errors raised by state construction, channel handling and measure evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension {requested} exceeds the configured cap {cap}")]
    Capacity { requested: usize, cap: usize },
    #[error("measure `{measure}` cannot evaluate this input: {reason}")]
    Capability { measure: String, reason: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
