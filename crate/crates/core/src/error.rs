use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("scenario needs {strategies} deterministic strategies, above the cap of {cap}")]
    Capacity { strategies: u128, cap: u128 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("usage: {0}")]
    Usage(String),

    /// Help or version text was requested instead of a run.
    #[error("{0}")]
    Help(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
