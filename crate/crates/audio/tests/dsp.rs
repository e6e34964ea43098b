//! Frontend checks against independent oracles.

use std::f64::consts::PI;

use cxverb_audio::dsp::{
    apply_crm, chip, de_emphasis, dechip, istft, optimal_smoothing, oracle_mask, pre_emphasis, smoothed_input, stft,
    SmootherConfig, StftConfig, ORACLE_THRESHOLD,
};
use cxverb_core::{CxTensor, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let s: f64 = reference.iter().map(|v| v * v).sum();
    let e: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (s / e).log10()
}

#[test]
fn emphasis_round_trip() {
    let x = noise(16000, 1);
    let y = de_emphasis(&pre_emphasis(&x, 0.97).unwrap(), 0.97).unwrap();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() <= 1e-10 * scale));
}

#[test]
fn white_noise_round_trip_exceeds_60_db() {
    let cfg = StftConfig::default();
    let x = noise(16000, 2);
    let y = istft(&stft(&x, &cfg).unwrap(), &cfg, Some(x.len())).unwrap();
    let snr = snr_db(&x[512..x.len() - 512], &y[512..x.len() - 512]);
    assert!(snr >= 60.0, "{snr} dB");
}

#[test]
fn frame_matches_naive_dft() {
    let cfg = StftConfig::default();
    let x = noise(4000, 3);
    let s = stft(&x, &cfg).unwrap();
    let w = cfg.window();
    let t = 7;
    let start = t * cfg.hop - cfg.n_fft / 2;
    for k in [0, 1, 31, 128, 256] {
        let (mut re, mut im) = (0.0, 0.0);
        for n in 0..cfg.n_fft {
            let phase = -2.0 * PI * (k * n) as f64 / cfg.n_fft as f64;
            re += x[start + n] * w[n] * phase.cos();
            im += x[start + n] * w[n] * phase.sin();
        }
        let (a, b) = s.at(&[0, 0, t, k]);
        assert!((a - re).abs() < 1e-9 && (b - im).abs() < 1e-9, "bin {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn any_half_second_signal_round_trips(len in 8000usize..20000, seed in any::<u64>()) {
        let cfg = StftConfig::default();
        let x = noise(len, seed);
        let y = istft(&stft(&x, &cfg).unwrap(), &cfg, Some(len)).unwrap();
        prop_assert!(snr_db(&x, &y) >= 60.0);
    }
}

/// Mean smoothed power per bin over the steady-state frames, against the
/// expected periodogram `sigma^2 * sum(w^2)` of unit white noise.
#[test]
fn steady_state_power_tracks_white_noise_psd() {
    let cfg = StftConfig::default();
    let x = noise(16000 * 12, 4);
    let y = stft(&x, &cfg).unwrap();
    let s = optimal_smoothing(&y, &SmootherConfig::default()).unwrap();
    let truth: f64 = cfg.window().iter().map(|w| w * w).sum();
    let (frames, bins) = (s.power.dims()[0], s.power.dims()[1]);
    let warm = 250;
    for f in 0..bins {
        let mean = (warm..frames).map(|t| s.power.data()[t * bins + f]).sum::<f64>() / (frames - warm) as f64;
        let db = 10.0 * (mean / truth).log10();
        assert!(db.abs() <= 3.0, "bin {f}: {db:.2} dB");
    }
}

#[test]
fn smoothed_input_matches_polar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = CxTensor::<f64>::randn([1, 1, 6, 9], 1.0, &mut rng).unwrap();
    let p = Tensor::<f64>::from_vec([6, 9], (0..54).map(|_| rng.gen_range(0.0..4.0)).collect()).unwrap();
    let out = smoothed_input(&y, &p).unwrap();
    for i in 0..54 {
        let (r, im) = (y.re().data()[i], y.im().data()[i]);
        let theta = im.atan2(r);
        let amp = p.data()[i].sqrt();
        assert!((out.re().data()[i] - amp * theta.cos()).abs() <= 1e-12);
        assert!((out.im().data()[i] - amp * theta.sin()).abs() <= 1e-12);
        let phase = out.im().data()[i].atan2(out.re().data()[i]);
        assert!((phase - theta).abs() <= 1e-12);
    }
}

#[test]
fn oracle_mask_reconstructs_target_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = CxTensor::<f64>::randn([1, 1, 20, 33], 1.0, &mut rng).unwrap();
    let y = CxTensor::<f64>::randn([1, 1, 20, 33], 1.0, &mut rng).unwrap();
    let xh = apply_crm(&y, &oracle_mask(&x, &y).unwrap()).unwrap();
    for i in 0..x.numel() {
        if y.re().data()[i].hypot(y.im().data()[i]) > ORACLE_THRESHOLD {
            assert!((xh.re().data()[i] - x.re().data()[i]).abs() <= 1e-10);
            assert!((xh.im().data()[i] - x.im().data()[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn chips_are_lossless_for_every_length() {
    for t in 1..=2000 {
        let re: Vec<f64> = (0..t * 3).map(|i| i as f64).collect();
        let s = CxTensor::from_vecs([1, 1, t, 3], re.clone(), re.iter().map(|v| -v).collect()).unwrap();
        let chips = chip(&s, 257, "u").unwrap();
        assert_eq!(chips.len(), t.div_ceil(257));
        assert!(dechip(&chips).unwrap().bit_eq(&s), "{t} frames");
    }
}
