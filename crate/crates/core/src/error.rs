//! Error type shared by all modules.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite component at index {index}")]
    NonFiniteComponent { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty profile: {0}")]
    EmptyProfile(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("movie {0} has no emotion label")]
    NoLabel(u64),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("insufficient history: user {user} has {events} event(s), need at least 2")]
    InsufficientHistory { user: u64, events: usize },

    #[error("hit rate is undefined for an empty list")]
    UndefinedHit,

    #[error("format error in {file}: {message}")]
    Format { file: String, message: String },

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn format(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
