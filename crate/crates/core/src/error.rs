use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes are incompatible for an operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// An invalid model, shift, or training configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A config file entry that could not be accepted, with its 1-based line.
    #[error("config error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    /// Malformed text in the custom shift grammar.
    #[error("parse error at byte {position}: {message} (token {token:?})")]
    Parse {
        token: String,
        position: usize,
        message: String,
    },

    /// Invalid data, e.g. an out-of-range label.
    #[error("data error: {0}")]
    Data(String),

    /// A gradient or parameter became NaN or infinite.
    #[error("non-finite value in {path}")]
    NonFinite { path: String },

    /// Training loss became NaN.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Weights(#[from] WeightFileError),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Failure kinds when decoding a weight file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightFileError {
    #[error("bad magic bytes, not a weight file")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated weight file: {0}")]
    Truncated(String),
    #[error("malformed weight file: {0}")]
    Malformed(String),
    #[error("tensor {path} has dtype {found}, expected {expected}")]
    DTypeMismatch {
        path: String,
        found: &'static str,
        expected: &'static str,
    },
    #[error("refusing to write an empty parameter store")]
    EmptyStore,
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
