use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid reaction model: {0}")]
    InvalidModel(String),

    #[error("operation requires a bistable model")]
    NotBistable,

    #[error("integrator failed to meet tolerance: {0}")]
    StepFailure(String),

    #[error("path of steady states infeasible at s = {s}: {reason}")]
    PathInfeasible { s: f64, reason: String },

    #[error("length {length} is not below the threshold {threshold}")]
    Infeasible { length: f64, threshold: f64 },

    #[error("timeout after t = {0}")]
    Timeout(f64),

    #[error("state is {distance} away from the target, capture radius is {radius}")]
    CaptureRadius { distance: f64, radius: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("upper horizon {0} is not feasible")]
    InfeasibleUpperBound(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
