use crate::error::{Error, Result};

/// 25 ms analysis frames.
pub const FRAME_LEN: usize = 400;
/// 10 ms frame advance.
pub const FRAME_HOP: usize = 160;
/// Frames whose reference energy is this far below the loudest frame are
/// excluded from framewise averages.
pub const ACTIVE_FLOOR_DB: f64 = -40.0;

/// Start offsets of the complete frames of a `len`-sample signal.
pub fn frames(len: usize) -> Vec<usize> {
    if len < FRAME_LEN {
        return Vec::new();
    }
    (0..=(len - FRAME_LEN) / FRAME_HOP).map(|i| i * FRAME_HOP).collect()
}

/// Offsets of frames whose energy lies within `ACTIVE_FLOOR_DB` of the
/// loudest frame of `reference`.
pub fn active_frames(reference: &[f64]) -> Vec<usize> {
    let starts = frames(reference.len());
    let energy: Vec<f64> = starts.iter().map(|&s| reference[s..s + FRAME_LEN].iter().map(|v| v * v).sum()).collect();
    let peak = energy.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Vec::new();
    }
    let floor = peak * 10f64.powf(ACTIVE_FLOOR_DB / 10.0);
    starts.into_iter().zip(energy).filter(|&(_, e)| e > floor).map(|(s, _)| s).collect()
}

/// Validates a reference/degraded pair for framewise comparison.
pub(crate) fn check_pair(reference: &[f64], degraded: &[f64], min_frames: usize) -> Result<Vec<usize>> {
    if reference.len() != degraded.len() {
        return Err(Error::Data(format!(
            "reference has {} samples but degraded has {}",
            reference.len(),
            degraded.len()
        )));
    }
    let n = frames(reference.len()).len();
    if n < min_frames {
        return Err(Error::Data(format!("{n} frames available, at least {min_frames} required")));
    }
    let active = active_frames(reference);
    if active.is_empty() {
        return Err(Error::Data("reference signal is silent".into()));
    }
    Ok(active)
}

pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

pub(crate) fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()).collect()
}
