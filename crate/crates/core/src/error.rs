use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle undefined at the origin of the (x, y) plane")]
    Domain,

    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    #[error("parameter fit diverged: {0}")]
    FitDiverged(String),

    #[error("invalid simulator parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite loss at step {step}: {what}")]
    NonFiniteLoss { step: usize, what: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("unknown heartbeat label {0:?}")]
    UnknownLabel(String),

    #[error("split violation: {0}")]
    Split(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than failed computations.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::IntegrationDiverged { .. } | Error::FitDiverged(_) | Error::NonFiniteLoss { .. }
        )
    }
}
