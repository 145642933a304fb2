use thiserror::Error;

/// Errors reported by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported spatial dimension {0} (only d = 2 is implemented)")]
    UnsupportedDimension(usize),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step {step} is outside the noise window [{start}, {end})")]
    OutsideNoiseWindow { step: i64, start: i64, end: i64 },

    #[error("time {0} is not a multiple of the time step {1}")]
    OffGridTime(f64, f64),

    #[error("non-finite values after step {step}; reduce dt (currently {dt})")]
    BlowUp { step: i64, dt: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("envelope violated by {amount:e} at t = {time} (member {member})")]
    EnvelopeViolation { member: usize, time: f64, amount: f64 },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
