use std::f64::consts::LN_10;

use crate::error::Result;
use crate::metrics::frames::{check_pair, hamming, FRAME_LEN};
use crate::metrics::lpc::{autocorrelation, levinson, lpc_cepstrum, LPC_ORDER};

/// Per-frame cepstral distances are clipped to `[0, CD_MAX]`.
pub const CD_MAX: f64 = 10.0;
/// Fraction of frames (lowest values) kept by the LLR average.
const LLR_KEEP: f64 = 0.95;

/// Windowed autocorrelation and predictor of one frame; a flat predictor
/// stands in for frames without a valid model.
fn analyze(frame: &[f64], window: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
    let w: Vec<f64> = frame.iter().zip(window).map(|(x, h)| x * h).collect();
    let r = autocorrelation(&w, LPC_ORDER);
    let a = levinson(&r).map(|(a, _)| a);
    (r, a)
}

fn flat() -> Vec<f64> {
    let mut a = vec![0.0; LPC_ORDER + 1];
    a[0] = 1.0;
    a
}

/// Mean cepstral distance in dB over active frames. Order-10 LPC cepstra
/// exclude `c0`, so the value is invariant to the gain of `degraded`.
pub fn cepstral_distance(reference: &[f64], degraded: &[f64]) -> Result<f64> {
    let active = check_pair(reference, degraded, 1)?;
    let window = hamming(FRAME_LEN);
    let scale = 10.0 / LN_10;
    let mut total = 0.0;
    for &s in &active {
        let (_, ar) = analyze(&reference[s..s + FRAME_LEN], &window);
        let (_, ad) = analyze(&degraded[s..s + FRAME_LEN], &window);
        let (cr, cd) = (lpc_cepstrum(&ar.unwrap_or_else(flat)), lpc_cepstrum(&ad.unwrap_or_else(flat)));
        let ss: f64 = cr.iter().zip(&cd).map(|(a, b)| (a - b).powi(2)).sum();
        total += (scale * (2.0 * ss).sqrt()).clamp(0.0, CD_MAX);
    }
    Ok(total / active.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlrResult {
    pub value: f64,
    /// Active frames skipped because the reference autocorrelation matrix
    /// was singular.
    pub skipped: usize,
}

/// Log-likelihood ratio `ln(a_d R a_d' / a_r R a_r')` per active frame with
/// the reference autocorrelation matrix `R`, averaged over the lowest 95 %
/// of frames.
pub fn llr_detail(reference: &[f64], degraded: &[f64]) -> Result<LlrResult> {
    let active = check_pair(reference, degraded, 1)?;
    let window = hamming(FRAME_LEN);
    let mut values = Vec::with_capacity(active.len());
    let mut skipped = 0;
    for &s in &active {
        let (r, ar) = analyze(&reference[s..s + FRAME_LEN], &window);
        let Some(ar) = ar else {
            skipped += 1;
            continue;
        };
        let (_, ad) = analyze(&degraded[s..s + FRAME_LEN], &window);
        let ad = ad.unwrap_or_else(flat);
        let quad = |a: &[f64]| -> f64 {
            let mut q = 0.0;
            for i in 0..a.len() {
                for j in 0..a.len() {
                    q += a[i] * r[i.abs_diff(j)] * a[j];
                }
            }
            q
        };
        // the reference predictor minimizes the quadratic form, so only
        // round-off can push the ratio below one
        values.push((quad(&ad) / quad(&ar)).ln().max(0.0));
    }
    if values.is_empty() {
        return Ok(LlrResult { value: 0.0, skipped });
    }
    values.sort_by(f64::total_cmp);
    let keep = ((values.len() as f64 * LLR_KEEP).round() as usize).max(1);
    Ok(LlrResult { value: values[..keep].iter().sum::<f64>() / keep as f64, skipped })
}

pub fn llr(reference: &[f64], degraded: &[f64]) -> Result<f64> {
    Ok(llr_detail(reference, degraded)?.value)
}
