use thiserror::Error;

/// Errors raised by field evaluation, solvers and the estimate harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested outside the admissible domain (x = 0 for
    /// r-dependent operators, t = 0 where an identity divides by t, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A jet of higher order was requested than the field can supply.
    #[error("jet order exhausted: requested {requested}, available {available}")]
    Order { requested: usize, available: usize },
    /// Invalid argument or parameter combination.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Input data unusable for the requested statistic.
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
