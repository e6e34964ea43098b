use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::simulate::NoiseKind;
use crate::SAMPLE_RATE;

/// Which part of the impulse response forms the training target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// Direct path only.
    Direct,
    /// Direct path plus reflections within `early_ms`.
    Early,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Inclusive range reverberation times are drawn from, seconds.
    pub t60_range: (f64, f64),
    /// Gain of the direct-path tap at index 0.
    pub direct_gain: f64,
    /// Direct-to-reverberant energy ratio of generated responses, dB.
    pub drr_db: f64,
    /// Boundary between early and late reflections, milliseconds.
    pub early_ms: f64,
    pub snr_db: f64,
    /// Impulse response length in samples.
    pub rir_len: usize,
    pub noise_kinds: Vec<NoiseKind>,
    pub target: TargetKind,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t60_range: (0.2, 0.8),
            direct_gain: 1.0,
            drr_db: 0.0,
            early_ms: 50.0,
            snr_db: 20.0,
            rir_len: (0.8 * SAMPLE_RATE as f64) as usize,
            noise_kinds: NoiseKind::ALL.to_vec(),
            target: TargetKind::Direct,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.t60_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("T60 range {lo}..{hi} must be positive and ordered")));
        }
        if (self.rir_len as f64) < hi * SAMPLE_RATE as f64 {
            return Err(Error::Config(format!(
                "impulse response of {} samples is shorter than T60 {hi} s at {SAMPLE_RATE} Hz",
                self.rir_len
            )));
        }
        if !self.snr_db.is_finite() || !self.drr_db.is_finite() {
            return Err(Error::Config("SNR and DRR must be finite".into()));
        }
        if !(self.direct_gain > 0.0 && self.direct_gain.is_finite()) {
            return Err(Error::Config(format!("direct gain {} must be positive", self.direct_gain)));
        }
        if self.early_ms < 0.0 {
            return Err(Error::Config(format!("early boundary {} ms is negative", self.early_ms)));
        }
        if self.noise_kinds.is_empty() {
            return Err(Error::Config("at least one noise kind is required".into()));
        }
        Ok(())
    }

    pub fn early_samples(&self) -> usize {
        (self.early_ms * 1e-3 * SAMPLE_RATE as f64).round() as usize
    }
}

/// Statistical room impulse response: the direct tap at index 0 followed by
/// Gaussian noise under an exponential envelope that falls 60 dB in `t60`
/// seconds, scaled to the configured direct-to-reverberant ratio.
pub fn generate_rir<R: Rng + ?Sized>(cfg: &SimConfig, t60: f64, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (lo, hi) = cfg.t60_range;
    if !(lo..=hi).contains(&t60) {
        return Err(Error::Config(format!("T60 {t60} s outside configured range {lo}..{hi} s")));
    }
    let decay = 3.0 * std::f64::consts::LN_10 / (t60 * SAMPLE_RATE as f64);
    let mut h = vec![0.0; cfg.rir_len];
    h[0] = cfg.direct_gain;
    for (n, v) in h.iter_mut().enumerate().skip(1) {
        let g: f64 = rng.sample(StandardNormal);
        *v = g * (-decay * n as f64).exp();
    }
    let tail: f64 = h[1..].iter().map(|v| v * v).sum();
    let want = cfg.direct_gain * cfg.direct_gain * 10f64.powf(-cfg.drr_db / 10.0);
    if tail > 0.0 {
        let s = (want / tail).sqrt();
        h[1..].iter_mut().for_each(|v| *v *= s);
    }
    Ok(h)
}
