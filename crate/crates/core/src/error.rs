use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or iteration failed to reach its tolerance.
    #[error("numeric failure in {what}: achieved error estimate {achieved:e}")]
    NumericFailure { what: String, achieved: f64 },

    #[error("unsupported parametrization: {0}")]
    Unsupported(String),

    /// Parameter values on a boundary between limit regimes.
    #[error("boundary case not covered: {0}")]
    Boundary(String),

    #[error("budget exceeded: {requested} cells requested, limit is {limit}")]
    Budget { requested: u128, limit: u128 },

    /// The sample carries no usable information (zero variance, all-zero sums).
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// A self-check of a constructed object failed.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
