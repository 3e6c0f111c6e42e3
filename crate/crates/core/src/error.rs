use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QmooError {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A register or table would exceed its configured size cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The reference front has zero hypervolume, so normalization is undefined.
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl QmooError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QmooError::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QmooError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        QmooError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, QmooError>;
