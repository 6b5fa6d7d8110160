use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input bytes were not valid UTF-8.
    #[error("{source_name}: invalid UTF-8 at byte offset {offset}")]
    Ingest { source_name: String, offset: usize },

    /// A configuration value is out of range or malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller passed inconsistent arguments (length mismatch, empty input, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A word or token stream did not line up with its reference.
    #[error("alignment error at position {position}: expected {expected:?}, found {found:?}")]
    Alignment {
        position: usize,
        expected: String,
        found: String,
    },

    /// A tagger backend returned output of the wrong shape.
    #[error("backend protocol error: {0}")]
    Protocol(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss} (learning rate {learning_rate} too high?)")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
        learning_rate: f64,
    },

    #[error("metrics undefined: confusion matrix is empty")]
    UndefinedMetrics,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
