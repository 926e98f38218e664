use std::io;

use thiserror::Error;

use crate::feature::FeatureKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("mixed feature tags: expected {expected:?}, got {actual:?}")]
    MixedFeatures {
        expected: FeatureKind,
        actual: FeatureKind,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("frame source: {0}")]
    Frames(String),

    #[error("index format: {0}")]
    Format(String),

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("invalid query at {path}: {message}")]
    Query { path: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn query(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Query {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dimension(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
