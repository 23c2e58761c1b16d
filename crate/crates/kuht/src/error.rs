use thiserror::Error;

/// Errors produced by statistics, samplers, and data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("target does not provide {0}")]
    UnsupportedTarget(&'static str),

    #[error("kernel family {0} is not usable here: {1}")]
    UnsupportedKernel(&'static str, &'static str),

    #[error("alphabet size mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("geometric mixture is degenerate: supports are disjoint")]
    DegenerateMixture,

    #[error("exponent estimation failed: {0}")]
    Estimation(String),

    #[error("ingestion error at row {row}, column {col}: {reason}")]
    Ingestion {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
