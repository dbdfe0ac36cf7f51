use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A privacy parameter is out of range (e.g. a non-positive finite epsilon).
    #[error("invalid privacy budget: {0}")]
    Budget(String),

    #[error("privacy budget exhausted at `{label}`: would spend epsilon {epsilon_after:.6} / delta {delta_after:.3e} of ({epsilon_total}, {delta_total:.3e})")]
    BudgetExhausted {
        label: String,
        epsilon_after: f64,
        delta_after: f64,
        epsilon_total: f64,
        delta_total: f64,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    /// A CSV cell could not be parsed. `row` is 1-based and counts data rows only.
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("fitting did not converge: {0}")]
    Convergence(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
