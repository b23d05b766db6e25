use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error taxonomy for the whole crate.
///
/// `Input` covers precondition violations on otherwise well-formed data;
/// `Capacity` is returned instead of silently truncating when an exact
/// (exhaustive) mode is asked to enumerate past its guard. Instance-file
/// problems get their own variants so callers can distinguish a syntax
/// error from a distribution that fails validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("malformed instance file: {0}")]
    Malformed(String),

    #[error("distribution not normalized: {0}")]
    Normalization(String),

    #[error("subset mask out of range: {0}")]
    MaskRange(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
