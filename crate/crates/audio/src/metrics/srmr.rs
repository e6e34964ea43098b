use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

const ACOUSTIC_BANDS: usize = 23;
const ACOUSTIC_RANGE_HZ: (f64, f64) = (125.0, 6400.0);
/// Stages in each acoustic band's bandpass cascade.
const STAGES: i32 = 4;
const ENVELOPE_CUTOFF_HZ: f64 = 250.0;
/// Envelopes are decimated by this factor before modulation filtering.
const DECIMATION: usize = 16;
const MOD_BANDS: usize = 8;
const MOD_RANGE_HZ: (f64, f64) = (4.0, 128.0);
const MOD_Q: f64 = 2.0;

/// Second-order section, transposed direct form II.
#[derive(Clone)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    s: [f64; 2],
}

impl Biquad {
    fn bandpass(fc: f64, q: f64, fs: f64) -> Self {
        let w = 2.0 * PI * fc / fs;
        let alpha = w.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self { b: [alpha / a0, 0.0, -alpha / a0], a: [-2.0 * w.cos() / a0, (1.0 - alpha) / a0], s: [0.0; 2] }
    }

    fn lowpass(fc: f64, fs: f64) -> Self {
        let w = 2.0 * PI * fc / fs;
        let alpha = w.sin() / 2f64.sqrt();
        let (c, a0) = (w.cos(), 1.0 + alpha);
        let b = (1.0 - c) / 2.0 / a0;
        Self { b: [b, 2.0 * b, b], a: [-2.0 * c / a0, (1.0 - alpha) / a0], s: [0.0; 2] }
    }

    fn run(&mut self, x: &mut [f64]) {
        for v in x.iter_mut() {
            let y = self.b[0] * *v + self.s[0];
            self.s[0] = self.b[1] * *v - self.a[0] * y + self.s[1];
            self.s[1] = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }
}

fn erb(f: f64) -> f64 {
    24.7 * (4.37e-3 * f + 1.0)
}

fn erb_rate(f: f64) -> f64 {
    21.4 * (4.37e-3 * f + 1.0).log10()
}

fn erb_rate_inv(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 4.37e-3
}

fn acoustic_centers() -> Vec<f64> {
    let (lo, hi) = (erb_rate(ACOUSTIC_RANGE_HZ.0), erb_rate(ACOUSTIC_RANGE_HZ.1));
    (0..ACOUSTIC_BANDS).map(|i| erb_rate_inv(lo + (hi - lo) * i as f64 / (ACOUSTIC_BANDS - 1) as f64)).collect()
}

fn modulation_centers() -> Vec<f64> {
    let ratio = MOD_RANGE_HZ.1 / MOD_RANGE_HZ.0;
    (0..MOD_BANDS).map(|m| MOD_RANGE_HZ.0 * ratio.powf(m as f64 / (MOD_BANDS - 1) as f64)).collect()
}

/// Reference-free modulation energy ratio: a 23-band gammatone-like
/// filterbank (cascaded bandpass sections one ERB wide), rectified and
/// low-passed envelopes, and 8 log-spaced modulation bands from 4 to
/// 128 Hz. Returns the ratio of energy in modulation bands 1-4 to bands 5-8,
/// averaged over acoustic bands. Reverberation fills envelope dips and
/// lowers the value.
pub fn srmr_lite(x: &[f64]) -> Result<f64> {
    let fs = SAMPLE_RATE as f64;
    if x.len() < SAMPLE_RATE as usize {
        return Err(Error::Data(format!("{} samples is shorter than the 1 s minimum", x.len())));
    }
    // a cascade of n identical sections narrows the -3 dB bandwidth by sqrt(2^(1/n) - 1)
    let narrowing = (2f64.powf(1.0 / STAGES as f64) - 1.0).sqrt();
    let env_fs = fs / DECIMATION as f64;
    let mods = modulation_centers();
    let mut ratios = Vec::with_capacity(ACOUSTIC_BANDS);
    for fc in acoustic_centers() {
        let mut band = x.to_vec();
        let q = fc * narrowing / erb(fc);
        for _ in 0..STAGES {
            Biquad::bandpass(fc, q, fs).run(&mut band);
        }
        band.iter_mut().for_each(|v| *v = v.abs());
        for _ in 0..2 {
            Biquad::lowpass(ENVELOPE_CUTOFF_HZ, fs).run(&mut band);
        }
        let env: Vec<f64> = band.iter().step_by(DECIMATION).copied().collect();
        let energies: Vec<f64> = mods
            .iter()
            .map(|&fm| {
                let mut m = env.clone();
                Biquad::bandpass(fm, MOD_Q, env_fs).run(&mut m);
                m.iter().map(|v| v * v).sum()
            })
            .collect();
        let low: f64 = energies[..MOD_BANDS / 2].iter().sum();
        let high: f64 = energies[MOD_BANDS / 2..].iter().sum();
        if high > 0.0 {
            ratios.push(low / high);
        }
    }
    if ratios.is_empty() {
        return Err(Error::Data("signal has no modulation energy".into()));
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_layout() {
        let c = acoustic_centers();
        assert_eq!(c.len(), 23);
        assert!((c[0] - 125.0).abs() < 1e-9 && (c[22] - 6400.0).abs() < 1e-6);
        let m = modulation_centers();
        assert!((m[0] - 4.0).abs() < 1e-12 && (m[7] - 128.0).abs() < 1e-9);
    }

    #[test]
    fn bandpass_has_unit_peak_gain() {
        let fs = 16000.0;
        let mut f = Biquad::bandpass(1000.0, 3.0, fs);
        let mut x: Vec<f64> = (0..16000).map(|n| (2.0 * PI * 1000.0 * n as f64 / fs).sin()).collect();
        f.run(&mut x);
        let peak = x[8000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-3);
    }

    #[test]
    fn short_input_is_rejected() {
        assert!(matches!(srmr_lite(&[0.1; 8000]), Err(Error::Data(_))));
    }

    #[test]
    fn amplitude_modulation_raises_the_ratio() {
        let fs = 16000.0;
        let carrier = |n: usize| (2.0 * PI * 1000.0 * n as f64 / fs).sin();
        let steady: Vec<f64> = (0..32000).map(carrier).collect();
        let modulated: Vec<f64> =
            (0..32000).map(|n| carrier(n) * (1.0 + (2.0 * PI * 5.0 * n as f64 / fs).sin())).collect();
        assert!(srmr_lite(&modulated).unwrap() > srmr_lite(&steady).unwrap());
    }
}
