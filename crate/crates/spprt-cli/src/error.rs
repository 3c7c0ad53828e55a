//! Command-line error type carrying the exit-code contract: 2 for input
//! and configuration problems, 3 for calibration failure, 4 for numerical
//! or I/O errors at runtime.

use spprt_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or malformed input: config documents, plan files,
    /// flag combinations, inconsistent histories.
    #[error("{0}")]
    Config(String),

    /// Calibration exhausted its budget away from the targets.
    #[error("{0}")]
    Calibration(String),

    /// Numerical or I/O failure while executing a valid request.
    #[error("{0}")]
    Runtime(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Calibration(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Library errors sort themselves: validation failures are input problems,
/// calibration failure keeps its dedicated exit code, and the rest
/// (unbounded brackets, non-finite values, feasibility caps) are runtime.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invalid(msg) => CliError::Config(msg),
            CoreError::CalibrationFailed { .. } => CliError::Calibration(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
