use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    BadRow {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("split plan needs {required} documents but the corpus has {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {0} is required but absent")]
    MissingClass(u8),

    #[error("degenerate weights for IOWA variant {variant}: no positive mass")]
    DegenerateWeights { variant: String },

    #[error("vocabulary mismatch: model was fitted on a different vocabulary")]
    VocabularyMismatch,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
