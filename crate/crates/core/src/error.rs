use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (bad order, non-positive σ, empty domain, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: mismatched shapes, missing output, insufficient jet order.
    #[error("usage error: {0}")]
    Usage(String),

    /// The requested operation is not defined for this problem.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical oracle (quadrature, reference solver) failed its own checks.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// Optimization produced non-finite values.
    #[error("divergence: {0}")]
    Divergence(String),

    #[error("architecture string: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
