use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("occupation {value} outside [0, {ceiling}]")]
    OutOfRange { value: f64, ceiling: f64 },

    #[error("root finder did not converge after {iterations} steps (target log-ratio {target})")]
    RootNotFound { iterations: usize, target: f64 },

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("invariant breach at step {step}, cell {cell}, node {node}: value {value} ({what})")]
    InvariantBreach {
        step: u64,
        cell: usize,
        node: usize,
        value: f64,
        what: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint `{path}`: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
