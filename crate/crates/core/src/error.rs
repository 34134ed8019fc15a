use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TobitError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TobitError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("series too short: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("singular design matrix (condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("residual variance is zero; t-statistics are undefined")]
    DegenerateVariance,

    #[error("difference filter is not stable: sum of |phi_i| = {sum} >= 1")]
    UnstableFilter { sum: f64 },

    #[error("significance level {0}% is not tabulated (expected 1, 5 or 10)")]
    LevelNotTabulated(f64),

    #[error("invalid critical-value table: {0}")]
    InvalidTable(String),

    #[error("no candidate lag order in 1..={k_max} could be fitted")]
    NoLagCandidate { k_max: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid SDMX series key {0:?}")]
    InvalidSeriesKey(String),

    #[error("empty date range: {start} is after {end}")]
    EmptyDateRange { start: String, end: String },

    #[error("malformed SDMX CSV from {url}: {message}")]
    MalformedCsv { url: String, message: String },

    #[error("empty SDMX payload from {url}")]
    EmptyPayload { url: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TobitError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TobitError::InvalidParameter(msg.into())
    }
}
