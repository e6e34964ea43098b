//! Audio side of the dereverberation system: the spectral frontend
//! (pre-emphasis, STFT, optimal smoothing, chips, mask application, WAV I/O),
//! a statistical room-impulse-response simulator, and objective metrics.

pub mod dsp;
pub mod error;
pub mod metrics;
pub mod simulate;

pub use error::{Error, Result};

/// Sample rate every component operates at.
pub const SAMPLE_RATE: u32 = 16_000;
