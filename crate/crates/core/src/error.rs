use std::io;

use crate::page::PageId;

/// Errors surfaced by the index, its storage layer and the data generators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },

    #[error("operation requires a non-empty entry set")]
    EmptySet,

    #[error("split requires at least two entries, got {0}")]
    SplitTooSmall(usize),

    #[error("node for {page} needs {bytes} bytes but pages hold {limit}")]
    PageOverflow { page: PageId, bytes: usize, limit: usize },

    #[error("unknown or freed {0}")]
    UnknownPage(PageId),

    #[error("page store exhausted ({limit} pages)")]
    StoreExhausted { limit: usize },

    #[error("malformed file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no {kind} registered under the name `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("the `{variant}` variant does not support {op}")]
    Unsupported { variant: &'static str, op: &'static str },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
