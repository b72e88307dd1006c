use thiserror::Error;

use crate::model::codec::CodecError;

/// Errors raised by the algorithmic layers of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A value or combination of inputs violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value produced internally failed its own type contract.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
