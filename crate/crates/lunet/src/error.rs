//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by construction, numerics, training, and serialization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A diagonal constant is too small for a stable triangular solve.
    #[error("singular diagonal: |k[{index}]| = {magnitude:e} is below the floor {floor:e}")]
    SingularDiagonal {
        index: usize,
        magnitude: f64,
        floor: f64,
    },

    /// An error raised while processing a specific network block.
    #[error("block {block}: {source}")]
    InBlock { block: usize, source: Box<Error> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("loss became non-finite ({value}) at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        value: f64,
    },

    #[error("forward trace does not match network: {0}")]
    TraceMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid domain for field `{field}`: {reason}")]
    InvalidDomain { field: String, reason: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("corrupt dataset: {0}")]
    CorruptDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the index of the network block it occurred in.
    pub fn in_block(block: usize, source: Error) -> Self {
        Error::InBlock {
            block,
            source: Box::new(source),
        }
    }

    /// The innermost error, unwrapping any block annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::InBlock { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
