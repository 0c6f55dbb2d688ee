use thiserror::Error;

/// Errors produced by construction and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid rate matrix: {0}")]
    InvalidRate(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different state spaces")]
    SpaceMismatch,

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("state `{state}` cannot be resolved: {reason}")]
    UnresolvableState { state: String, reason: String },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
