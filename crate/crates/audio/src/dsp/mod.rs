//! Waveform and spectrogram frontend.

mod chip;
mod emphasis;
mod export;
mod mask;
mod smoothing;
mod stft;
mod wav;

pub use chip::{chip, dechip, Chip};
pub use emphasis::{de_emphasis, pre_emphasis, DEFAULT_PRE_EMPHASIS};
pub use export::{magnitude_db, write_spectrogram_csv, write_spectrogram_pgm, DB_FLOOR};
pub use mask::{apply_crm, oracle_mask, smoothed_input, ORACLE_THRESHOLD};
pub use smoothing::{optimal_alpha, optimal_smoothing, SmootherConfig, SmootherState, Smoothed};
pub use stft::{istft, stft, StftConfig};
pub use wav::{read_wav, write_wav};
