use thiserror::Error;

/// Errors produced by the decomposition pipeline.
#[derive(Debug, Error)]
pub enum HnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("SVD failed to converge on a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("solver diverged at iteration {iteration}: non-finite iterate")]
    Divergence { iteration: usize },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    CsvFormat(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HnnError>;

pub(crate) fn invalid(msg: impl Into<String>) -> HnnError {
    HnnError::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> HnnError {
    HnnError::DimensionMismatch(msg.into())
}
