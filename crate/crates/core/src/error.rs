use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A binary or text file did not match its expected layout.
    #[error("{}: format error at byte {offset}: {reason}", path.display())]
    Format { path: PathBuf, offset: u64, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {}: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },

    #[error("frame {frame}: {reason}")]
    Ingest { frame: u64, reason: String },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unmatched frames between prediction and ground truth: {0}")]
    UnmatchedFrames(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit status for command-line front ends.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Io { .. } | Error::Manifest { .. } | Error::Ingest { .. } => 2,
            Error::Config { .. } => 3,
            Error::UnmatchedFrames(_) => 4,
            Error::Eval(_) | Error::Geometry(_) | Error::Internal(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), offset, reason: reason.into() }
    }
}
