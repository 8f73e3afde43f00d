use thiserror::Error;

use crate::elliptic::SolveDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spacing h = {0} (must be finite and positive)")]
    InvalidSpacing(f64),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape {shape} has no interior cells at h = {h}")]
    EmptyInterior { shape: String, h: f64 },
    #[error("shape {shape} is too coarse at h = {h}: {cells} interior cells along axis {axis} (need at least {min})")]
    TooCoarse {
        shape: String,
        h: f64,
        axis: usize,
        cells: usize,
        min: usize,
    },
    #[error("dimension mismatch: expected n = {expected}, got n = {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value {value} from {function} at cell {index:?} (x = {point:?})")]
    NonFinite {
        function: String,
        index: [usize; 3],
        point: [f64; 3],
        value: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver did not converge: {0:?}")]
    NoConvergence(SolveDiagnostics),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
