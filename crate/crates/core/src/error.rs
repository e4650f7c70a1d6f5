use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the modeling pipeline.
#[derive(Debug, Error)]
pub enum CatmError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("document {doc_id}: {msg}")]
    InvalidDoc { doc_id: String, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stream has {frames} frames, fewer than the clip length {clip_len}")]
    StreamTooShort { frames: usize, clip_len: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("missing features: {0}; rerun in word-only mode")]
    MissingFeatures(String),

    #[error(
        "generator gave up after {attempts} layout proposals; loosen the relative-time parameters"
    )]
    RejectionBudget { attempts: usize },

    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CatmError>;

impl CatmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CatmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn doc(doc_id: &str, msg: impl Into<String>) -> Self {
        CatmError::InvalidDoc {
            doc_id: doc_id.to_string(),
            msg: msg.into(),
        }
    }
}
