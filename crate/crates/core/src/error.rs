use thiserror::Error;

#[derive(Debug, Error)]
pub enum KcmError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state space of {states} states exceeds the configured cap of {cap}")]
    Capacity { states: u128, cap: usize },

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("generator is not irreducible: {0}")]
    Irreducible(String),

    #[error("study failed: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KcmError>;

pub(crate) fn validation(msg: impl Into<String>) -> KcmError {
    KcmError::Validation(msg.into())
}

pub(crate) fn range(msg: impl Into<String>) -> KcmError {
    KcmError::Range(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> KcmError {
    KcmError::Dimension(msg.into())
}
