use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::SAMPLE_RATE;

/// Corner frequency of the low-frequency noise's first-order low-pass.
const LOWFREQ_CORNER_HZ: f64 = 400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Lowfreq,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Lowfreq];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Lowfreq => "lowfreq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// `n` samples of noise with the requested spectral shape (unnormalized).
pub fn generate_noise<R: Rng + ?Sized>(kind: NoiseKind, n: usize, rng: &mut R) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    match kind {
        NoiseKind::White => white,
        NoiseKind::Lowfreq => {
            let a = 1.0 - (-2.0 * PI * LOWFREQ_CORNER_HZ / SAMPLE_RATE as f64).exp();
            let mut y = 0.0;
            white
                .into_iter()
                .map(|x| {
                    y += a * (x - y);
                    y
                })
                .collect()
        }
        NoiseKind::Pink => {
            if n < 2 {
                return white;
            }
            // 1/f power: scale each bin's amplitude by 1/sqrt(k)
            let mut planner = RealFftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            let mut buf = white;
            let mut spec = fwd.make_output_vec();
            fwd.process(&mut buf, &mut spec).expect("buffer sizes come from the plan");
            spec[0] = 0.0.into();
            for (k, c) in spec.iter_mut().enumerate().skip(1) {
                *c /= (k as f64).sqrt();
            }
            let last = spec.len() - 1;
            spec[last].im = 0.0;
            let mut out = inv.make_output_vec();
            inv.process(&mut spec, &mut out).expect("buffer sizes come from the plan");
            out
        }
    }
}
