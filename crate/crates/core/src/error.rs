use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation `{op}` is not defined in dimension {dim}")]
    Dimension { op: &'static str, dim: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite values after step at t = {t}")]
    Overflow { t: f64 },

    #[error("explicit stability bound violated: dt = {dt} exceeds {limit}")]
    Unstable { dt: f64, limit: f64 },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
