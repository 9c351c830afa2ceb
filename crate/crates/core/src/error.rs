//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{what} index {index} out of range (bound {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("{op} expects a scalar, got shape {shape:?}")]
    Rank { op: &'static str, shape: Vec<usize> },

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("IDX parse error at byte {offset}: {reason}")]
    Idx { offset: usize, reason: String },

    #[error("filelist line {line}: {reason}")]
    FileList { line: usize, reason: String },

    #[error("failed to read {}: {source}", path.display())]
    FileAccess {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
