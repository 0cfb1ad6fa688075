use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-side contract violation: bad parameters, mismatched dimensions, missing inputs.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed or inconsistent on-disk data.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Geometry that has no defined answer, e.g. an angle at a zero-length arm.
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// A graph or neighbor list does not have the shape an operation needs.
    #[error("structural error at node {node}: {message}")]
    Structural { node: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Io(_) => 2,
            Error::Format { .. } => 3,
            Error::Degenerate(_) | Error::Structural { .. } => 1,
        }
    }
}
