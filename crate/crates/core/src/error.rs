//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition violation on an operation input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor/parameter shape disagreement.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Operation called in the wrong state (e.g. inference on untrained
    /// parameters, backward without a cached forward pass).
    #[error("invalid state: {0}")]
    State(String),

    /// An EMG channel whose session mean is zero cannot be balanced.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// A session whose min equals its max cannot be normalized.
    #[error("degenerate session: signal has no dynamic range")]
    DegenerateSession,

    /// Measured signal has zero range; NRMSE/NMAE undefined.
    #[error("degenerate range: measured signal has zero range")]
    DegenerateRange,

    /// Zero variance input; correlation undefined.
    #[error("degenerate variance: input has zero variance")]
    DegenerateVariance,

    /// Oracle calibration residual exceeded tolerance.
    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code, one per error family. Used for CLI
    /// exit codes and error lines.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Shape(_) => 3,
            Error::State(_) => 4,
            Error::DegenerateChannel(_) => 5,
            Error::DegenerateSession => 6,
            Error::DegenerateRange => 7,
            Error::DegenerateVariance => 8,
            Error::Calibration(_) => 9,
            Error::Format(_) => 10,
            Error::Io(_) => 11,
            Error::Csv(_) => 12,
            Error::Json(_) => 13,
        }
    }

    pub fn code_name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Shape(_) => "shape-mismatch",
            Error::State(_) => "invalid-state",
            Error::DegenerateChannel(_) => "degenerate-channel",
            Error::DegenerateSession => "degenerate-session",
            Error::DegenerateRange => "degenerate-range",
            Error::DegenerateVariance => "degenerate-variance",
            Error::Calibration(_) => "calibration-failure",
            Error::Format(_) => "format-error",
            Error::Io(_) => "io-error",
            Error::Csv(_) => "csv-error",
            Error::Json(_) => "json-error",
        }
    }
}
