use thiserror::Error;

/// Errors raised by the numeric operations (standardizer, probe fits,
/// metrics, PCA, attribution).
#[derive(Debug, Error)]
pub enum MathError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl MathError {
    pub fn input(msg: impl Into<String>) -> Self {
        MathError::Input(msg.into())
    }

    pub fn numerics(msg: impl Into<String>) -> Self {
        MathError::Numerics(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        MathError::Degenerate(msg.into())
    }
}
