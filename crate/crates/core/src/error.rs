use thiserror::Error;

/// Errors raised by the statistical routines.
///
/// The variants are coarse on purpose: the command-line front end maps each
/// one onto a distinct exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The bootstrap law or the projection covariance is identically zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
