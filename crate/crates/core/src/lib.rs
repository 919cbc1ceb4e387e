//! Faster-than-Nyquist (FTN) signaling with successive symbol-by-symbol
//! sequence estimation.
//!
//! - [`pulse`]: root-raised-cosine pulses and ISI taps
//! - [`chain`]: modulator, AWGN channel, matched filter and the discrete model
//! - [`region`]: the noise-free perfect-estimation region and its boundary
//! - [`detect`]: successive and go-back-`K` detectors with operation counters
//! - [`harness`]: Monte-Carlo BER, spectral efficiency and CSV output

pub mod chain;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod pulse;
pub mod region;
pub mod validate;

pub use chain::{Chain, FtnConfig, Modulation, NoiseSpec, SampleSequence, SymbolSequence, Waveform};
pub use detect::{DetectionResult, DetectorConfig, OpCount};
pub use error::{FtnError, Result};
pub use harness::{BerRecord, ExperimentConfig, ReceivePath, SeRecord};
pub use pulse::{IsiProfile, RrcPulse};
pub use region::{PulseParams, RegionBoundary, RegionQuery};
