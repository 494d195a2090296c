use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Data violates an operation's precondition (too short, empty, NaN, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration argument is out of its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Dimension mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Caller broke an API contract (stale cache, leaked split, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("checksum mismatch for {}: expected {expected}, found {found}", .path.display())]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("channel count mismatch in {}: manifest says {expected}, blob holds {found}", .path.display())]
    ChannelMismatch {
        path: PathBuf,
        expected: usize,
        found: String,
    },

    #[error("malformed file {}: {reason}", .path.display())]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
