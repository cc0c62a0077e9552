use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical result that breaks a physical invariant, such as the
    /// first law or the allowed heat/work sign patterns. Signals a numerics
    /// bug, not bad input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Invariant(_) | Error::Eigen(_) => 3,
            Error::Io(_) => 1,
        }
    }
}
