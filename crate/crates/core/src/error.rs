use std::path::PathBuf;

/// Errors produced by the model, samplers and data pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (must be < {bound})")]
    Index { index: usize, bound: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("column {column} is degenerate: {reason}")]
    DegenerateColumn { column: usize, reason: String },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("non-finite log-joint at iteration {iteration}: {dump}")]
    NonFinite { iteration: usize, dump: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
