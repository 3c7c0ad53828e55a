//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by design, evaluation, calibration, and benchmark routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The stop region never closed the continuation region within the
    /// scan cap, so the continuation interval could not be bracketed.
    #[error("continuation region unbounded within cap (|ln z| <= {cap})")]
    UnboundedContinuation { cap: f64 },

    /// A quantity that must be finite came out NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Calibration hit its iteration cap far from the target tolerance.
    /// The best point found is carried along for inspection.
    #[error(
        "calibration failed: objective {objective:.6e} after {iterations} iterations \
         (best lambda0 = {lambda0:.6e}, lambda1 = {lambda1:.6e})"
    )]
    CalibrationFailed {
        objective: f64,
        iterations: u32,
        lambda0: f64,
        lambda1: f64,
        best: Box<crate::calibrate::CalibrationOutcome>,
    },

    /// No fixed sample size up to the cap meets the error-rate targets.
    #[error("no fixed sample size up to {cap} meets alpha <= {alpha}, beta <= {beta}")]
    FssCapExceeded { cap: u64, alpha: f64, beta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
