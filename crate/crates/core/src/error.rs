use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Out-of-range sizes or inconsistent architecture/hyperparameter settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value violated an operation's precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed IDX container.
    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A checkpoint does not belong to the requested architecture or class subset.
    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
