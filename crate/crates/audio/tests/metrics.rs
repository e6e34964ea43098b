//! Metric identities, invariances and degradation sweeps.

use cxverb_audio::metrics::{cepstral_distance, fw_seg_snr, llr, llr_detail, srmr_lite, SEGMENT_SNR_MAX};
use cxverb_audio::simulate::{generate_rir, reverberate_and_mix, synthetic_sources, SimConfig, Source};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Frozen outputs of this implementation on fixed inputs; a change means
/// the metric definitions moved.
const FWSEGSNR_0DB_WHITE: f64 = -2.393393;
const SRMR_WHITE_NOISE: f64 = 0.471678737;

const SWEEP: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];

fn suite() -> Vec<Source> {
    synthetic_sources(10, 3.0, 2024)
}

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Reverberant copy of `s` at `t60` with a response drawn from `seed`, so
/// every level of a sweep shares the same underlying noise sequence.
fn reverberate(s: &[f64], t60: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let h = generate_rir(&SimConfig::default(), t60, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let m = reverberate_and_mix(s, &h, None, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (m.target, m.reverberant)
}

#[test]
fn reference_metrics_are_reflexive() {
    for src in suite().iter().take(3) {
        let x = &src.samples;
        assert_eq!(fw_seg_snr(x, x).unwrap(), SEGMENT_SNR_MAX);
        assert_eq!(cepstral_distance(x, x).unwrap(), 0.0);
        assert_eq!(llr(x, x).unwrap(), 0.0);
    }
}

#[test]
fn gain_invariance_except_fwsegsnr() {
    let src = &suite()[0].samples;
    let (x, y) = reverberate(src, 0.5, 1);
    let g: Vec<f64> = y.iter().map(|v| 0.37 * v).collect();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-300);
    assert!(rel(cepstral_distance(&x, &y).unwrap(), cepstral_distance(&x, &g).unwrap()) <= 1e-6);
    assert!(rel(llr(&x, &y).unwrap(), llr(&x, &g).unwrap()) <= 1e-6);
    assert!(rel(srmr_lite(&y).unwrap(), srmr_lite(&g).unwrap()) <= 1e-6);
    let doubled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    assert!(rel(srmr_lite(&y).unwrap(), srmr_lite(&doubled).unwrap()) <= 1e-6);
    assert!(fw_seg_snr(&x, &y).unwrap() != fw_seg_snr(&x, &g).unwrap());
}

#[test]
fn llr_frames_are_nonnegative_and_none_skipped_on_speech() {
    let src = &suite()[1].samples;
    let (x, y) = reverberate(src, 0.8, 2);
    let r = llr_detail(&x, &y).unwrap();
    assert!(r.value > 0.0);
    assert_eq!(r.skipped, 0);
}

#[test]
fn zero_db_white_noise_scores_below_10_db() {
    let x = &suite()[2].samples;
    let n = white(x.len(), 3);
    let (ex, en) = (x.iter().map(|v| v * v).sum::<f64>(), n.iter().map(|v| v * v).sum::<f64>());
    let g = (ex / en).sqrt();
    let y: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a + g * b).collect();
    let v = fw_seg_snr(x, &y).unwrap();
    assert!(v < 10.0);
    assert!((v - FWSEGSNR_0DB_WHITE).abs() < 1e-5, "{v}");
}

#[test]
fn clean_speech_has_higher_srmr_than_reverberant() {
    for (i, src) in suite().iter().enumerate() {
        let (x, y) = reverberate(&src.samples, 0.8, 10 + i as u64);
        assert!(srmr_lite(&x).unwrap() > srmr_lite(&y).unwrap(), "utterance {i}");
    }
}

#[test]
fn stationary_white_noise_srmr() {
    let v = srmr_lite(&white(32000, 4)).unwrap();
    assert!((v / SRMR_WHITE_NOISE - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn t60_sweep_is_monotone() {
    let sources = suite();
    let mut means = Vec::new();
    for &t60 in &SWEEP {
        let mut acc = [0.0; 4];
        for (i, src) in sources.iter().enumerate() {
            let (x, y) = reverberate(&src.samples, t60, 500 + i as u64);
            acc[0] += fw_seg_snr(&x, &y).unwrap();
            acc[1] += cepstral_distance(&x, &y).unwrap();
            acc[2] += llr(&x, &y).unwrap();
            acc[3] += srmr_lite(&y).unwrap();
        }
        let m = acc.map(|v| v / sources.len() as f64);
        println!("T60 {t60:.2}: fwSegSNR {:.4} CD {:.4} LLR {:.4} SRMR {:.4}", m[0], m[1], m[2], m[3]);
        means.push(m);
    }
    for w in means.windows(2) {
        assert!(w[1][0] <= w[0][0], "fwSegSNR increased");
        assert!(w[1][1] >= w[0][1], "CD decreased");
        assert!(w[1][2] >= w[0][2], "LLR decreased");
        assert!(w[1][3] <= w[0][3], "SRMR increased");
    }
}
