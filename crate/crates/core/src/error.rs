use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corpus line {line}: {message}")]
    CorpusParse { line: usize, message: String },

    #[error(
        "corpus line {line}: mention [{start}, {end}) in document '{doc}' sentence {sentence} \
         is out of bounds (sentence length {len})"
    )]
    SpanOutOfBounds {
        line: usize,
        doc: String,
        sentence: usize,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("corpus line {line}: mention refers to unknown document '{doc}'")]
    UnknownDocument { line: usize, doc: String },

    #[error("corpus line {line}: duplicate document id '{doc}'")]
    DuplicateDocument { line: usize, doc: String },

    #[error("corpus has no mentions")]
    NoMentions,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("split leaves the {0} partition empty")]
    EmptyPartition(&'static str),

    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },

    #[error("embedding file line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("example {index} has no gold label")]
    Unlabeled { index: usize },

    #[error("non-finite gradient in parameter '{name}'")]
    NonFiniteGradient { name: String },

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
