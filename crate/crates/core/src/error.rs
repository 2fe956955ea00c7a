use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dataset `{0}` has no rows")]
    EmptyDataset(String),

    #[error("feature column `{column}` (index {index}) is constant on the training rows")]
    ConstantFeature { column: String, index: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("brute-force Shapley enumeration refused: {n_features} features exceeds the limit of {limit}")]
    TooManyFeatures { n_features: usize, limit: usize },

    #[error("invalid neighborhood spec: {0}")]
    InvalidNeighborhood(String),

    #[error("every neighbor changed the predicted label ({rejected} rejected)")]
    EmptyNeighborhood { rejected: usize },

    #[error("invalid heatmap request: {0}")]
    InvalidHeatmap(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model serialization: {0}")]
    Serialization(String),

    #[error("report: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
