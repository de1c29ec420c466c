use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OedError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration blew up at t = {time}")]
    IntegrationBlowup { time: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("enumeration too large: {entries} joint entries exceeds limit {limit}")]
    Capacity { entries: u128, limit: u128 },

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, OedError>;

impl From<std::io::Error> for OedError {
    fn from(e: std::io::Error) -> Self {
        OedError::Io(e.to_string())
    }
}

impl From<csv::Error> for OedError {
    fn from(e: csv::Error) -> Self {
        OedError::Io(e.to_string())
    }
}
