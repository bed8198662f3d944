use thiserror::Error;

/// Errors raised by the certification core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("unphysical state: |r| = {norm}")]
    UnphysicalState { norm: f64 },

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("target statistics are not realizable by any qubit state (residual {residual:.3e}, implied |r| = {implied_norm:.9})")]
    Infeasible { residual: f64, implied_norm: f64 },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("timetag stream error at record {index}: {reason}")]
    Timetag { index: u64, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
