use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input file; `offset` is the byte position where parsing failed.
    #[error("{what} at byte offset {offset}")]
    Format { what: String, offset: usize },

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("crc mismatch in stream `{stream}`")]
    Crc { stream: String },

    #[error("codebook {index} hash mismatch: container expects {expected:016x}, loaded {actual:016x}")]
    HashMismatch {
        index: usize,
        expected: u64,
        actual: u64,
    },

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("symbol {symbol} outside model support [{lo}, {hi}]")]
    OutOfSupport { symbol: i32, lo: i32, hi: i32 },
}

impl Error {
    pub(crate) fn format(what: impl Into<String>, offset: usize) -> Self {
        Error::Format {
            what: what.into(),
            offset,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
