use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index or window falls outside the available data.
    #[error("range error: {0}")]
    Range(String),

    /// Map parameters rejected at construction.
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),

    /// An iterative method failed to converge.
    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    /// An iterated curve stopped being tangent to the center-unstable cone.
    #[error("curve left the center-unstable cone at step {step}")]
    CurveLeftCone { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
