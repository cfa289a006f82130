use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the auction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid capacities: {0}")]
    InvalidCapacities(String),

    #[error("bundle {bundle:?} exceeds capacities {capacities:?}")]
    OutOfCapacity {
        bundle: Vec<u32>,
        capacities: Vec<u32>,
    },

    #[error("bundle space of size {size} exceeds the enumeration cap {cap}")]
    DomainTooLarge { size: u128, cap: u128 },

    #[error("invalid value model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    SchemaVersion {
        what: String,
        expected: u32,
        found: u32,
    },

    #[error("{}: {source}", context.display())]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
