use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] io::Error),

    #[error("malformed trace at {location}: {reason}")]
    Malformed { location: String, reason: String },

    #[error("truncated trace: {0}")]
    Truncated(String),

    #[error("empty report: {0}")]
    EmptyReport(String),

    #[error("sampling gap of {gap} s exceeds {limit} s for frequency {freq_index}")]
    GapTooLarge { freq_index: u16, gap: f64, limit: f64 },

    #[error("series is degenerate: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_value})")]
    NoConvergence {
        iterations: usize,
        best_value: f64,
        best_point: Vec<f64>,
    },

    #[error("all candidate families failed to fit: {0}")]
    AllFitsFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{0}` has not been completed")]
    MissingStage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
