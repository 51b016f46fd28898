use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and its diagnostics.
#[derive(Debug, Error)]
pub enum KseError {
    #[error("invalid grid size {0}: must be even and at least 8")]
    InvalidGrid(usize),

    #[error("fields live on different grids (n={0} vs n={1})")]
    GridMismatch(usize, usize),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),

    #[error("integration diverged at step {step} (t={time})")]
    Diverged { step: u64, time: f64 },

    #[error("corrupt snapshot {path}: {reason}")]
    CorruptSnapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KseError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        KseError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, KseError>;
