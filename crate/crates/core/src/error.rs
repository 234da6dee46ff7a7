use thiserror::Error;

/// Errors raised by the deformed-algebra numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid deformation parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid truncation: {0}")]
    Truncation(String),

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("series or quadrature did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
