use thiserror::Error;

/// Errors produced by the FTN simulation library.
#[derive(Debug, Error)]
pub enum FtnError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lag {lag} outside the autocorrelation support (|lag| <= {max})")]
    LagOutOfRange { lag: f64, max: f64 },

    #[error("symbol spacing tau={tau} does not fall on the waveform grid with {samples_per_symbol} samples per symbol")]
    GridMisalignment { tau: f64, samples_per_symbol: usize },

    #[error("QPSK mapping needs an even number of bits, got {0}")]
    OddBitCount(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("truncated ISI matrix is not positive definite (pivot {pivot} = {value:e}); lower the truncation threshold")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FtnError>;
