use std::io;

use thiserror::Error;

/// Errors produced by the filters and the page stores.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bit width: {0}")]
    InvalidWidth(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("fingerprint width {got} does not match filter width {expected}")]
    WidthMismatch { expected: u32, got: u32 },

    #[error("filter is full ({capacity} elements)")]
    FilterFull { capacity: u64 },

    #[error("fingerprint {0:#x} is not stored in the filter")]
    DeleteAbsent(u64),

    #[error("cannot borrow another quotient bit: remainder is down to one bit")]
    RemainderExhausted,

    #[error("corrupt encoding: {0}")]
    CorruptEncoding(String),

    #[error("page {index} out of range (store has {page_count} pages)")]
    OutOfRange { index: u64, page_count: u64 },

    #[error("storage error: {0}")]
    Storage(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
