use thiserror::Error;

use crate::linalg::MAX_ORDER;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("filter order {0} outside 1..={MAX_ORDER}")]
    InvalidOrder(usize),

    #[error("order mismatch: expected {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },

    /// Cholesky pivot fell below the relative floor; the caller should load
    /// the diagonal and retry.
    #[error("matrix not positive definite (pivot {pivot:e} at row {row}, floor {floor:e})")]
    NotPositiveDefinite { row: usize, pivot: f64, floor: f64 },

    #[error("speech PSD {0:e} below threshold")]
    ZeroSpeechPsd(f64),

    #[error("MVDR denominator {0:e} is degenerate")]
    DegenerateDenominator(f64),

    #[error("signal has {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("filter bank configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("frame has {got} bins, buffer expects {expected}")]
    BinCountMismatch { expected: usize, got: usize },

    #[error("reference signal is all zeros")]
    ZeroReference,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("noisy input differs from clean + noise by {diff:e} at sample {index}")]
    RefMismatch { index: usize, diff: f64 },

    #[error("missing reference signal: {0}")]
    MissingReference(&'static str),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("unsupported WAV: {0}")]
    UnsupportedWav(String),

    #[error("malformed weight file: {0}")]
    WeightFile(String),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
