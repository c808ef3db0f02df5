use thiserror::Error;

/// Errors raised by the engines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition (cap, truncation level, budget) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numerical procedure did not reach the requested accuracy.
    #[error("numeric failure: {message} (achieved error {achieved:e})")]
    Numeric { message: String, achieved: f64 },
    /// An enumeration or work budget was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// An exact identity that must hold by construction failed.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
