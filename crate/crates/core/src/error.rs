use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("latent dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("window of {window} samples is longer than the clip ({len} samples)")]
    WindowTooLong { window: usize, len: usize },
    #[error("phase shuffle radius {radius} exceeds time dimension {len}")]
    ShuffleRadius { radius: usize, len: usize },
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite {what} at {at}")]
    NonFinite { what: &'static str, at: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
