//! Error type shared by all toolkit modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("horizon exceeded: round {round} with horizon {horizon}")]
    HorizonExceeded { round: usize, horizon: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("grid too large: {levels} levels exceeds the enumeration cap of {cap}")]
    GridTooLarge { levels: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing data: {0}")]
    MissingData(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
