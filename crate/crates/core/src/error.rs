use thiserror::Error;

/// Errors raised by the model, distance and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transition matrix is reducible: no unique stationary distribution")]
    Reducible,

    #[error("zero likelihood at time {t}: no state can emit the observation")]
    ZeroLikelihood { t: usize },

    #[error("observation {0} is not in the support of a discrete emission")]
    Domain(f64),

    #[error("emission densities live on different observation spaces")]
    MixedSpace,

    #[error("envelope violated at l = {index}: f(l) = {value:e} exceeds {bound:e}")]
    EnvelopeViolation { index: u64, value: f64, bound: f64 },

    #[error("rejection budget of {budget} proposals exhausted")]
    RejectionBudget { budget: u64 },

    #[error("enumeration of {size} sequences exceeds the budget of {budget}")]
    Budget { size: f64, budget: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("chain aborted at iteration {iteration} (seed {seed}): {reason}")]
    ChainAborted { iteration: usize, seed: u64, reason: String, state: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
