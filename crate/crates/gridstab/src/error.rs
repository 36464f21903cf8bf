//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (bad probability, nonpositive tolerance, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Balanced ±1 injections require an even node count.
    #[error("cannot balance sources and sinks on {0} nodes: node count must be even")]
    OddNodeCount(usize),

    /// Operation requires a connected graph.
    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    /// Grid file or in-memory grid violates an invariant.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// State/grid dimension mismatch.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The damped-relaxation + Newton solve did not reach the residual target.
    #[error("no stable synchronous state found (residual {residual:.3e})")]
    NoStableSyncState { residual: f64 },

    /// Requested artifacts exist with a different configuration.
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),

    /// Evaluation requires at least one record.
    #[error("evaluation set is empty")]
    EmptyEvalSet,

    /// Training produced a nonfinite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite (lr too large?)")]
    NonFiniteLoss { epoch: usize },

    /// Checkpoint or data file does not match the expected layout.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
