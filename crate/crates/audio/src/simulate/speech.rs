use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::SAMPLE_RATE;

/// Formant frequencies and bandwidths (Hz) of a few vowels.
const VOWELS: [[(f64, f64); 3]; 5] = [
    [(730.0, 90.0), (1090.0, 110.0), (2440.0, 160.0)],
    [(530.0, 60.0), (1840.0, 100.0), (2480.0, 160.0)],
    [(270.0, 60.0), (2290.0, 100.0), (3010.0, 170.0)],
    [(570.0, 70.0), (840.0, 90.0), (2410.0, 160.0)],
    [(300.0, 60.0), (870.0, 90.0), (2240.0, 150.0)],
];

/// Two-pole resonator with unit gain at its center frequency.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bw: f64) -> Self {
        let fs = SAMPLE_RATE as f64;
        let r = (-PI * bw / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
        // |1 - a1 z^-1 - a2 z^-2| at z = e^{j theta}
        let re = 1.0 - a1 * theta.cos() - a2 * (2.0 * theta).cos();
        let im = a1 * theta.sin() + a2 * (2.0 * theta).sin();
        Self { a1, a2, gain: re.hypot(im), y1: 0.0, y2: 0.0 }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Raised-cosine attack and release over `ramp` samples.
fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn seconds<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> usize {
    (rng.gen_range(lo..hi) * SAMPLE_RATE as f64) as usize
}

/// Renders one voiced syllable: a glottal pulse train with spectral tilt
/// through three parallel formant resonators, optionally preceded by a fricative.
fn syllable<R: Rng + ?Sized>(out: &mut Vec<f64>, f0: f64, rng: &mut R) {
    if rng.gen_bool(0.3) {
        let n = seconds(rng, 0.04, 0.08);
        let (mut p1, mut p2) = (0.0, 0.0);
        for i in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            // second difference emphasizes high frequencies
            let hp = w - 2.0 * p1 + p2;
            p2 = p1;
            p1 = w;
            out.push(0.05 * hp * envelope(i, n, n / 4));
        }
    }
    let vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
    let mut formants: Vec<Resonator> = vowel.iter().map(|&(f, b)| Resonator::new(f * rng.gen_range(0.92..1.08), b)).collect();
    let n = seconds(rng, 0.15, 0.3);
    let level = rng.gen_range(0.6..1.0);
    let glide = rng.gen_range(-0.15..0.1);
    let (mut phase, mut tilt) = (0.0, 0.0);
    for i in 0..n {
        let progress = i as f64 / n as f64;
        let pitch = f0 * (1.0 + glide * progress) * (1.0 + 0.01 * (2.0 * PI * 5.0 * i as f64 / SAMPLE_RATE as f64).sin());
        phase += pitch / SAMPLE_RATE as f64;
        let mut pulse = 0.0;
        if phase >= 1.0 {
            phase -= 1.0;
            pulse = 1.0;
        }
        let breath: f64 = rng.sample(StandardNormal);
        tilt += 0.3 * (pulse + 0.02 * breath - tilt);
        let sum: f64 = formants.iter_mut().map(|r| r.tick(tilt)).sum();
        out.push(level * sum * envelope(i, n, n / 6));
    }
}

/// Speech-like test signal of `duration` seconds: words of two to four
/// formant-synthesized syllables separated by pauses, with speaker pitch and
/// vowel choices drawn from `rng`. Peak-normalized to 0.5.
pub fn synth_speech<R: Rng + ?Sized>(duration: f64, rng: &mut R) -> Vec<f64> {
    let total = (duration * SAMPLE_RATE as f64) as usize;
    let f0 = rng.gen_range(100.0..220.0);
    let lead = seconds(rng, 0.1, 0.2);
    let mut out = vec![0.0; lead];
    while out.len() < total {
        for _ in 0..rng.gen_range(2..=4) {
            syllable(&mut out, f0 * rng.gen_range(0.9..1.1), rng);
        }
        let pause = seconds(rng, 0.06, 0.25);
        out.extend(std::iter::repeat(0.0).take(pause));
    }
    out.truncate(total);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}
