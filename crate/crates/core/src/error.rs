use thiserror::Error;

/// Failure categories shared by every module. The CLI maps them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside the admissible parameter region.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation failed to meet its accuracy target or produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A requested lattice or sample would exceed the configured memory budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
