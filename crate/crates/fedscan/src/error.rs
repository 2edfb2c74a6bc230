//! Shared error and result types.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, malformed values, or inconsistent inputs.
    #[error("input error: {0}")]
    Input(String),

    /// File content that failed to parse, with location context.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A record crossed the owner/coordinator boundary carrying data it must not.
    #[error("privacy violation: {0}")]
    Privacy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn privacy(msg: impl Into<String>) -> Self {
        Error::Privacy(msg.into())
    }

    pub fn is_privacy(&self) -> bool {
        matches!(self, Error::Privacy(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
