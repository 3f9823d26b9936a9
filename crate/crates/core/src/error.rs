use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the search engine.
#[derive(Debug, Error)]
pub enum QasError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, QasError>;

impl QasError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QasError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        QasError::Parse { path: path.into(), message: message.into() }
    }
}
