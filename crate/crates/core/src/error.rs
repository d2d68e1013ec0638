use thiserror::Error;

/// Failure of a single forward simulation. Samplers turn this into an
/// infinite discrepancy so the proposal is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("singular right-hand side at t = {t}: {detail}")]
    Singularity { t: f64, detail: String },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("population left the positive half-line at t = {t}")]
    NonPositive { t: f64 },
    #[error("invalid simulator input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimulationError),
    #[error("particle degeneracy: {0}")]
    Degeneracy(String),
    #[error("chain initialization failed: {0}")]
    Initialization(String),
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
