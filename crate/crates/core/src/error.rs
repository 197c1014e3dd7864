use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (bad key, out-of-range value, inconsistent dims).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation precondition (layout mismatch, empty data, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in layer {layer}: {detail}")]
    Numeric { layer: usize, detail: String },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NonConvergence {
        iterations: usize,
        last_estimate: f64,
        last_iterate: Vec<f64>,
    },

    #[error("training diverged at task {task}, epoch {epoch}, step {step}: {detail}")]
    Diverged {
        task: usize,
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by invalid input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}
