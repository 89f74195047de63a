use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analytics library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: missing required column `{column}`")]
    MissingColumn { column: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("query out of domain: {0}")]
    OutOfDomain(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fleet: {0}")]
    DegenerateFleet(String),

    #[error("too few voyages: need at least {needed}, got {got}")]
    TooFewVoyages { needed: usize, got: usize },

    #[error("efficiency gain undefined for measured score {0}")]
    UndefinedGain(f64),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("path `{0}` is unclassifiable: it touches no discriminative segment")]
    Unclassifiable(String),

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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
