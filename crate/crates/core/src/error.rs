use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error in {source_name} (row {row}): {message}")]
    Data {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("training fault at episode {episode}, step {step}: {message}")]
    TrainingFault {
        episode: usize,
        step: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(source_name: impl Into<String>, row: usize, message: impl Into<String>) -> Self {
        Error::Data {
            source_name: source_name.into(),
            row,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error should be reported as a training fault (exit code 2)
    /// rather than a configuration or data problem.
    pub fn is_training_fault(&self) -> bool {
        matches!(self, Error::TrainingFault { .. })
    }
}
