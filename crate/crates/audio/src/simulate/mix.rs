use rand::Rng;

use crate::error::{Error, Result};
use crate::simulate::{fft_convolve, generate_noise, NoiseKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
}

/// Microphone signal and its aligned target, both `len(s)` samples.
#[derive(Clone, Debug)]
pub struct Mix {
    pub reverberant: Vec<f64>,
    pub target: Vec<f64>,
}

fn trim_trailing_zeros(h: &[f64]) -> &[f64] {
    let end = h.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    &h[..end]
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `y = s * h + n`, with `n` scaled so that `||s * h||^2 / ||n||^2` equals
/// the requested SNR. The target is `s` convolved with the first
/// `target_taps` taps of `h` (1 for the direct path).
pub fn reverberate_and_mix<R: Rng + ?Sized>(
    s: &[f64],
    h: &[f64],
    noise: Option<NoiseSpec>,
    target_taps: usize,
    rng: &mut R,
) -> Result<Mix> {
    if energy(s) == 0.0 {
        return Err(Error::Data("source signal is silent".into()));
    }
    let h = trim_trailing_zeros(h);
    if h.is_empty() {
        return Err(Error::Data("impulse response is all zeros".into()));
    }
    let mut y = fft_convolve(s, h);
    y.truncate(s.len());
    let taps = trim_trailing_zeros(&h[..target_taps.clamp(1, h.len())]);
    let target = if taps.is_empty() {
        vec![0.0; s.len()]
    } else {
        let mut x = fft_convolve(s, taps);
        x.truncate(s.len());
        x
    };
    if let Some(spec) = noise {
        if !spec.snr_db.is_finite() {
            return Err(Error::Data(format!("SNR {} dB is not finite", spec.snr_db)));
        }
        let n = generate_noise(spec.kind, s.len(), rng);
        let gain = (energy(&y) / (energy(&n) * 10f64.powf(spec.snr_db / 10.0))).sqrt();
        y.iter_mut().zip(&n).for_each(|(v, w)| *v += gain * w);
    }
    Ok(Mix { reverberant: y, target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone() -> Vec<f64> {
        (0..4000).map(|n| (n as f64 * 0.05).sin()).collect()
    }

    #[test]
    fn identity_response_without_noise_is_exact() {
        let s = tone();
        let mut delta = vec![0.0; 500];
        delta[0] = 1.0;
        let m = reverberate_and_mix(&s, &delta, None, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.reverberant, s);
        assert_eq!(m.target, s);
    }

    #[test]
    fn measured_snr_matches_request() {
        let s = tone();
        let h = [1.0, 0.0, 0.5, -0.25];
        for kind in NoiseKind::ALL {
            let spec = NoiseSpec { kind, snr_db: 20.0 };
            let m = reverberate_and_mix(&s, &h, Some(spec), 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let clean = reverberate_and_mix(&s, &h, None, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().reverberant;
            let noise: Vec<f64> = m.reverberant.iter().zip(&clean).map(|(a, b)| a - b).collect();
            let snr = 10.0 * (energy(&clean) / energy(&noise)).log10();
            assert!((snr - 20.0).abs() < 0.01, "{kind:?}: {snr}");
        }
    }

    #[test]
    fn silent_source_is_data_error() {
        let r = reverberate_and_mix(&[0.0; 10], &[1.0], None, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn early_target_keeps_leading_taps() {
        let s = tone();
        let h = [1.0, 0.5, 0.25, 0.125];
        let m = reverberate_and_mix(&s, &h, None, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for n in 1..s.len() {
            assert!((m.target[n] - (s[n] + 0.5 * s[n - 1])).abs() < 1e-12);
        }
    }
}
