use realfft::RealFftPlanner;

use crate::error::Result;
use crate::metrics::frames::{check_pair, hann, FRAME_LEN};
use crate::SAMPLE_RATE;

pub const SEGMENT_SNR_MIN: f64 = -10.0;
pub const SEGMENT_SNR_MAX: f64 = 35.0;
const BANDS: usize = 25;
const N_FFT: usize = 512;
/// Exponent applied to reference band magnitudes to form band weights.
const WEIGHT_EXPONENT: f64 = 0.2;
const MIN_FRAMES: usize = 10;

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with mel-spaced edges spanning 0 Hz to Nyquist,
/// one row of `N_FFT / 2 + 1` weights per band.
fn mel_bank() -> Vec<Vec<f64>> {
    let nyq = SAMPLE_RATE as f64 / 2.0;
    let edges: Vec<f64> = (0..BANDS + 2).map(|i| mel_inv(mel(nyq) * i as f64 / (BANDS + 1) as f64)).collect();
    let bin_hz = SAMPLE_RATE as f64 / N_FFT as f64;
    (0..BANDS)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..=N_FFT / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Frequency-weighted segmental SNR in dB: 25 mel bands on 25 ms / 10 ms
/// frames, band weights `|X_band|^0.2`, band SNRs clipped to [-10, 35] dB,
/// averaged over speech-active frames. Sensitive to the gain of `degraded`.
pub fn fw_seg_snr(reference: &[f64], degraded: &[f64]) -> Result<f64> {
    let active = check_pair(reference, degraded, MIN_FRAMES)?;
    let bank = mel_bank();
    let window = hann(FRAME_LEN);
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(N_FFT);
    let mut buf = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    let mut magnitude = |x: &[f64]| -> Vec<f64> {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for (i, (v, w)) in x.iter().zip(&window).enumerate() {
            buf[i] = v * w;
        }
        fft.process(&mut buf, &mut spec).expect("buffer sizes come from the plan");
        let mag: Vec<f64> = spec.iter().map(|c| c.norm()).collect();
        bank.iter().map(|tri| tri.iter().zip(&mag).map(|(t, m)| t * m).sum()).collect()
    };
    let mut total = 0.0;
    let mut counted = 0usize;
    for &s in &active {
        let x = magnitude(&reference[s..s + FRAME_LEN]);
        let y = magnitude(&degraded[s..s + FRAME_LEN]);
        let (mut num, mut den) = (0.0, 0.0);
        for (xb, yb) in x.iter().zip(&y) {
            let err = (xb - yb).powi(2);
            let snr = if err == 0.0 { SEGMENT_SNR_MAX } else { 10.0 * (xb * xb / err).log10() };
            let w = xb.powf(WEIGHT_EXPONENT);
            num += w * snr.clamp(SEGMENT_SNR_MIN, SEGMENT_SNR_MAX);
            den += w;
        }
        if den > 0.0 {
            total += (num / den).clamp(SEGMENT_SNR_MIN, SEGMENT_SNR_MAX);
            counted += 1;
        }
    }
    Ok(if counted == 0 { SEGMENT_SNR_MIN } else { total / counted as f64 })
}
