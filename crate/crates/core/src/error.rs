use alloc::string::String;

/// Errors raised by the restoration core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("image dimensions {0}x{1} are not a multiple of the 8x8 block size")]
    NotBlockAligned(usize, usize),
    #[error("padding margin {margin} exceeds the smallest image side {side}")]
    MarginTooLarge { margin: usize, side: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported filter size {0} (expected 3, 5, 7 or 9)")]
    UnsupportedFilterSize(usize),
    #[error("{filters} filters requested but a {m}x{m} basis has only {available} atoms")]
    TooManyFilters {
        filters: usize,
        m: usize,
        available: usize,
    },
    #[error("least-squares system is rank deficient")]
    RankDeficient,
    #[error("observation does not match the model task: {0}")]
    TaskMismatch(String),
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;
