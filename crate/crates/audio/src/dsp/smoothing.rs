use std::collections::VecDeque;

use cxverb_core::{CxTensor, Tensor};

use crate::error::{Error, Result};

/// Time-frequency varying smoothing parameter for a previous smoothed power
/// `p_prev` against the noise-floor estimate `noise`.
pub fn optimal_alpha(p_prev: f64, noise: f64) -> f64 {
    let r = p_prev / noise - 1.0;
    1.0 / (1.0 + r * r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmootherConfig {
    /// Frames in the sliding-minimum window of the noise-floor tracker.
    pub window_frames: usize,
    /// Upper bound on the applied smoothing parameter. The unbounded value
    /// reaches 1 whenever the smoothed power touches its own running minimum,
    /// which would freeze the recursion.
    pub alpha_max: f64,
    /// Floor on the smoothed power, in dB relative to the utterance's peak
    /// periodogram value.
    pub floor_db: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { window_frames: 120, alpha_max: 0.96, floor_db: -120.0 }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames == 0 {
            return Err(Error::Config("smoothing window must span at least one frame".into()));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return Err(Error::Config(format!("alpha_max {} outside (0, 1]", self.alpha_max)));
        }
        if !self.floor_db.is_finite() || self.floor_db > 0.0 {
            return Err(Error::Config(format!("floor_db {} must be finite and <= 0", self.floor_db)));
        }
        Ok(())
    }
}

/// Per-bin recursion state: the previous smoothed power and a monotone deque
/// of `(frame, power)` candidates for the sliding minimum.
#[derive(Clone, Debug)]
pub struct SmootherState {
    cfg: SmootherConfig,
    floor: f64,
    frame: usize,
    p: Vec<f64>,
    minima: Vec<VecDeque<(usize, f64)>>,
}

impl SmootherState {
    pub fn new(cfg: SmootherConfig, bins: usize, peak_power: f64) -> Result<Self> {
        cfg.validate()?;
        let floor = (peak_power * 10f64.powf(cfg.floor_db / 10.0)).max(f64::MIN_POSITIVE);
        Ok(Self { cfg, floor, frame: 0, p: vec![0.0; bins], minima: vec![VecDeque::new(); bins] })
    }

    /// Consumes one frame of periodogram values; returns `(P, noise, alpha)`
    /// for each bin.
    pub fn push(&mut self, power: &[f64]) -> Vec<(f64, f64, f64)> {
        let t = self.frame;
        self.frame += 1;
        let d = self.cfg.window_frames;
        power
            .iter()
            .enumerate()
            .map(|(f, &y2)| {
                let q = &mut self.minima[f];
                let (p, noise, alpha) = if t == 0 {
                    let p = y2.max(self.floor);
                    (p, p, 1.0)
                } else {
                    while q.front().is_some_and(|&(i, _)| i + d < t) {
                        q.pop_front();
                    }
                    let noise = q.front().map(|&(_, v)| v).unwrap_or(self.floor);
                    let prev = self.p[f];
                    let alpha = optimal_alpha(prev, noise).min(self.cfg.alpha_max);
                    ((alpha * prev + (1.0 - alpha) * y2).max(self.floor), noise, alpha)
                };
                while q.back().is_some_and(|&(_, v)| v >= p) {
                    q.pop_back();
                }
                q.push_back((t, p));
                self.p[f] = p;
                (p, noise, alpha)
            })
            .collect()
    }
}

/// Output maps of [`optimal_smoothing`], each shaped `(T, F)`.
#[derive(Clone, Debug)]
pub struct Smoothed {
    pub power: Tensor<f64>,
    pub noise: Tensor<f64>,
    pub alpha: Tensor<f64>,
}

/// Recursive first-order smoothing of `|Y|^2` with the optimal
/// time-frequency varying parameter. `y` has shape `(1, 1, T, F)`.
pub fn optimal_smoothing(y: &CxTensor<f64>, cfg: &SmootherConfig) -> Result<Smoothed> {
    let d = y.dims();
    if d.len() != 4 || d[0] != 1 || d[1] != 1 {
        return Err(Error::Shape(format!("expected a (1, 1, T, F) spectrogram, got {d:?}")));
    }
    let (frames, bins) = (d[2], d[3]);
    let power: Vec<f64> = y.re().data().iter().zip(y.im().data()).map(|(r, i)| r * r + i * i).collect();
    let peak = power.iter().copied().fold(0.0, f64::max);
    let mut state = SmootherState::new(cfg.clone(), bins, peak)?;
    let n = frames * bins;
    let (mut p, mut noise, mut alpha) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for row in power.chunks_exact(bins) {
        for (a, b, c) in state.push(row) {
            p.push(a);
            noise.push(b);
            alpha.push(c);
        }
    }
    let t = |v| Tensor::from_vec([frames, bins], v);
    Ok(Smoothed { power: t(p)?, noise: t(noise)?, alpha: t(alpha)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_alpha() {
        assert_eq!(optimal_alpha(3.0, 3.0), 1.0);
        assert_eq!(optimal_alpha(4.0, 2.0), 0.5);
        assert!(optimal_alpha(5.0, 1.0) < optimal_alpha(2.5, 1.0));
    }

    #[test]
    fn alpha_stays_in_unit_interval() {
        let re: Vec<f64> = (0..40 * 3).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let y = CxTensor::from_vecs([1, 1, 40, 3], re, vec![0.0; 120]).unwrap();
        let s = optimal_smoothing(&y, &SmootherConfig { window_frames: 8, ..Default::default() }).unwrap();
        assert!(s.alpha.data().iter().all(|&a| a > 0.0 && a <= 1.0));
        assert!(s.power.data().iter().all(|&p| p > 0.0));
        assert!(s.noise.data().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn silence_stays_at_floor() {
        let y = CxTensor::<f64>::zeros([1, 1, 5, 4]).unwrap();
        let s = optimal_smoothing(&y, &SmootherConfig::default()).unwrap();
        assert!(s.power.data().iter().all(|&p| p == f64::MIN_POSITIVE));
    }

    #[test]
    fn power_is_floored_relative_to_peak() {
        let mut re = vec![0.0; 6];
        re[0] = 1.0;
        let y = CxTensor::from_vecs([1, 1, 3, 2], re, vec![0.0; 6]).unwrap();
        let s = optimal_smoothing(&y, &SmootherConfig::default()).unwrap();
        let min = s.power.data().iter().copied().fold(f64::MAX, f64::min);
        assert!((min - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn noise_tracks_sliding_minimum() {
        let re = vec![4.0, 1.0, 9.0, 9.0, 9.0, 9.0];
        let y = CxTensor::from_vecs([1, 1, 6, 1], re.iter().map(|v: &f64| v.sqrt()).collect(), vec![0.0; 6]).unwrap();
        let cfg = SmootherConfig { window_frames: 2, alpha_max: 1.0, floor_db: -120.0 };
        let s = optimal_smoothing(&y, &cfg).unwrap();
        let (p, n) = (s.power.data(), s.noise.data());
        for t in 1..6usize {
            let lo = t.saturating_sub(2);
            let expect = p[lo..t].iter().copied().fold(f64::MAX, f64::min);
            assert_eq!(n[t], expect, "frame {t}");
        }
    }
}
