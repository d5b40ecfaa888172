//! Error type for file formats and tooling.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    /// A malformed line, reported with its file and 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// A model container whose version line is not recognized.
    #[error("unrecognized model format version: '{0}'")]
    UnknownVersion(String),
    /// A model container that ends before its declared payload.
    #[error("truncated model file: {0}")]
    Truncated(String),
    /// A declared tensor does not match the shape the configuration implies.
    #[error("tensor '{name}': expected shape {expected}, got {got}")]
    TensorShape {
        name: String,
        expected: String,
        got: String,
    },
    /// Bytes left over after the declared payload.
    #[error("trailing data after model payload")]
    TrailingData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] subtag_core::Error),
}

impl FormatError {
    pub fn parse(path: &str, line: usize, msg: impl Into<String>) -> FormatError {
        FormatError::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
