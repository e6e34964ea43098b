//! Objective quality metrics: frequency-weighted segmental SNR, cepstral
//! distance, log-likelihood ratio and a simplified speech-to-reverberation
//! modulation energy ratio. All operate on 16 kHz signals.

mod frames;
mod fwsegsnr;
mod lpc;
mod report;
mod spectral_distance;
mod srmr;

pub use frames::{active_frames, frames, ACTIVE_FLOOR_DB, FRAME_HOP, FRAME_LEN};
pub use fwsegsnr::{fw_seg_snr, SEGMENT_SNR_MAX, SEGMENT_SNR_MIN};
pub use lpc::{levinson, lpc_cepstrum, LPC_ORDER};
pub use report::{evaluate_pair, MetricsReport, UtteranceMetrics, REPORT_CSV_HEADER};
pub use spectral_distance::{cepstral_distance, llr, llr_detail, LlrResult, CD_MAX};
pub use srmr::srmr_lite;
