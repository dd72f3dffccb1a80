use thiserror::Error;

/// Errors produced by the simulator and the analytical layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any work was done.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller broke a documented precondition of a graph mutation.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gave up after {attempts} attempts: {what}")]
    RetryExhausted { what: &'static str, attempts: u32 },

    /// Least-squares design matrix without full column rank.
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    /// A jump time exceeded the search horizon.
    #[error("jump time censored beyond t = {horizon}")]
    Censored { horizon: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// Integration failed even after repeatedly halving the step.
    #[error("integration failed: {0}")]
    Integration(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
