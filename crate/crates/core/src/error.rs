use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-differentiable op: {0}")]
    NonDifferentiable(&'static str),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid graph {id}: {reason}")]
    InvalidGraph { id: String, reason: String },

    #[error("asymmetric duplicate edge ({src}, {dst}, {key})")]
    AsymmetricDuplicate { src: usize, dst: usize, key: usize },

    #[error("degenerate target {0}: standard deviation is zero")]
    DegenerateTarget(usize),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for data problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGraph { .. }
            | Error::AsymmetricDuplicate { .. }
            | Error::DegenerateTarget(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::NonFinite(_) | Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}
