//! Error type shared by the whole library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A terminating hypergeometric series has a zero denominator parameter
    /// before the series terminates.
    #[error("singular series parameter: c + {index} = 0 before termination")]
    SingularParameter { index: u64 },

    /// A requested order exceeds the configured recurrence cap.
    #[error("order {n} exceeds the configured cap {cap}")]
    Truncation { n: usize, cap: usize },

    /// A computation would exceed a hard resource limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The requested moment does not exist for the given parameters.
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    /// Input data cannot be explained by the model family.
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
