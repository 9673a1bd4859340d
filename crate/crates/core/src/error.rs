use thiserror::Error;

use crate::kernel::StabilityViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("stability violation: {0}")]
    Stability(#[from] StabilityViolation),

    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error("{what} = {value} is outside the supported range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("intensity {intensity} exceeded the thinning envelope {envelope} at t = {time}")]
    EnvelopeBreach {
        time: f64,
        intensity: f64,
        envelope: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            message: message.into(),
            residual,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Stability(_) | Error::InvalidKernel(_) => 2,
            Error::NumericalFailure { .. } | Error::EnvelopeBreach { .. } | Error::Estimation(_) => 4,
            Error::OutOfRange { .. } => 2,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
