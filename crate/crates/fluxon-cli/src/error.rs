//! Error type of the scenario harness and its mapping to exit codes.

use thiserror::Error;

use fluxon::FluxonError;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for configuration or I/O errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for fatal numerical failures.
pub const EXIT_NUMERIC: i32 = 3;
/// Exit status when a requested acceptance check fails.
pub const EXIT_CHECK: i32 = 4;

/// Failures of the harness.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// The scenario configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// Reading the configuration or writing an artifact failed.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// The configuration is not valid JSON for the schema.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Writing a CSV artifact failed.
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A library computation failed in a way that aborts the whole run.
    #[error(transparent)]
    Numeric(#[from] FluxonError),

    /// Two tables could not be joined on their `(x, t, N)` keys.
    #[error("join error: {0}")]
    Join(String),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Json(_) | HarnessError::Csv(_) => {
                EXIT_CONFIG
            }
            HarnessError::Numeric(_) | HarnessError::Join(_) => EXIT_NUMERIC,
        }
    }
}

/// Convenience alias for harness results.
pub type Result<T> = std::result::Result<T, HarnessError>;
