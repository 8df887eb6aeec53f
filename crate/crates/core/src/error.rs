use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` covers invalid parameters caught up front, `Logic` covers
/// harness bugs (e.g. stepping a decided process), `Strategy` covers
/// adversary scripts that violate the scheduler rules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("logic error: {0}")]
    Logic(String),
    #[error("illegal strategy at segment {index}: {reason}")]
    Strategy { index: usize, reason: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn logic(msg: impl Into<String>) -> Self {
        Error::Logic(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
