//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the pipeline, grouped so callers can
/// map classes of failure to distinct process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("synthesis capacity exceeded for class {class}: {message}")]
    Capacity { class: String, message: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("ambiguous label for epoch {0}")]
    AmbiguousLabel(String),

    #[error("model initialization failed for class {class}: {message}")]
    Init { class: String, message: String },

    #[error("training error: {0}")]
    Train(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("confidence undefined: {0}")]
    Confidence(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("model file version mismatch: found {found}, supported {supported}")]
    Version { found: String, supported: u32 },

    #[error("feature fingerprint mismatch: model has {model}, data has {data}")]
    Fingerprint { model: String, data: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
