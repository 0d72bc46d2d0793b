use thiserror::Error;

/// Errors produced by the sketch library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precision {0} out of range 4..=18")]
    InvalidPrecision(u8),
    #[error("register count {0} out of range 16..=262144")]
    InvalidRegisterCount(u32),
    #[error("register width {0} out of range 1..=8")]
    InvalidWidth(u8),
    #[error("value {value} does not fit in {width} bits")]
    ValueOverflow { value: u8, width: u8 },
    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("cannot merge sketches: {0}")]
    Incompatible(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("malformed sketch file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
