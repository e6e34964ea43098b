use std::f64::consts::PI;

use cxverb_core::CxTensor;
use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

use crate::error::{Error, Result};

/// Analysis/synthesis geometry. The window is a periodic Hann of `n_fft`
/// samples and frames are centered (the signal is zero-padded by `n_fft / 2`
/// on both sides).
#[derive(Clone, Debug, PartialEq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { n_fft: 512, hop: 128, sample_rate: crate::SAMPLE_RATE }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.n_fft as f64;
        (0..self.n_fft).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()).collect()
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Checks the geometry and that the squared window overlap-adds to a
    /// constant at this hop.
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || self.n_fft % 2 != 0 {
            return Err(Error::Config(format!("n_fft must be even and >= 2, got {}", self.n_fft)));
        }
        if self.hop == 0 || self.hop > self.n_fft || self.n_fft % self.hop != 0 {
            return Err(Error::Config(format!("hop {} must divide n_fft {}", self.hop, self.n_fft)));
        }
        let w = self.window();
        let sums: Vec<f64> =
            (0..self.hop).map(|i| (i..self.n_fft).step_by(self.hop).map(|j| w[j] * w[j]).sum()).collect();
        let (lo, hi) = sums.iter().fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
        if hi - lo > 1e-9 * hi {
            return Err(Error::Config(format!(
                "window does not overlap-add to a constant at hop {} (n_fft {})",
                self.hop, self.n_fft
            )));
        }
        Ok(())
    }
}

/// Complex spectrogram of shape `(1, 1, T, n_fft / 2 + 1)`.
pub fn stft(x: &[f64], cfg: &StftConfig) -> Result<CxTensor<f64>> {
    cfg.validate()?;
    if x.len() < cfg.n_fft {
        return Err(Error::Data(format!("signal of {} samples is shorter than one {}-sample window", x.len(), cfg.n_fft)));
    }
    let (n, half, bins) = (cfg.n_fft, cfg.n_fft / 2, cfg.bins());
    let frames = cfg.frames(x.len());
    let window = cfg.window();
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
    let mut input = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let (mut re, mut im) = (Vec::with_capacity(frames * bins), Vec::with_capacity(frames * bins));
    for t in 0..frames {
        let start = (t * cfg.hop) as isize - half as isize;
        for (i, slot) in input.iter_mut().enumerate() {
            let k = start + i as isize;
            *slot = if k >= 0 && (k as usize) < x.len() { x[k as usize] * window[i] } else { 0.0 };
        }
        fft.process(&mut input, &mut spectrum).map_err(|e| Error::Data(e.to_string()))?;
        for c in &spectrum {
            re.push(c.re);
            im.push(c.im);
        }
    }
    Ok(CxTensor::from_vecs([1, 1, frames, bins], re, im)?)
}

/// Weighted overlap-add inverse of [`stft`]. `length` defaults to
/// `(T - 1) * hop` samples.
pub fn istft(s: &CxTensor<f64>, cfg: &StftConfig, length: Option<usize>) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = s.dims();
    if d.len() != 4 || d[0] != 1 || d[1] != 1 || d[3] != cfg.bins() {
        return Err(Error::Shape(format!("expected (1, 1, T, {}), got {d:?}", cfg.bins())));
    }
    let (n, half, bins, frames) = (cfg.n_fft, cfg.n_fft / 2, cfg.bins(), d[2]);
    let length = length.unwrap_or((frames - 1) * cfg.hop);
    let window = cfg.window();
    let ifft = RealFftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut spectrum = ifft.make_input_vec();
    let mut frame = ifft.make_output_vec();
    let padded = (frames - 1) * cfg.hop + n;
    let mut acc = vec![0.0; padded];
    let mut norm = vec![0.0; padded];
    let (re, im) = (s.re().data(), s.im().data());
    for t in 0..frames {
        for (k, c) in spectrum.iter_mut().enumerate() {
            *c = Complex::new(re[t * bins + k], im[t * bins + k]);
        }
        // a real signal has purely real DC and Nyquist bins
        spectrum[0].im = 0.0;
        spectrum[bins - 1].im = 0.0;
        ifft.process(&mut spectrum, &mut frame).map_err(|e| Error::Data(e.to_string()))?;
        let start = t * cfg.hop;
        for i in 0..n {
            acc[start + i] += frame[i] / n as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    Ok((0..length)
        .map(|i| {
            let p = i + half;
            if p < padded && norm[p] > 1e-10 {
                acc[p] / norm[p]
            } else {
                0.0
            }
        })
        .collect())
}
