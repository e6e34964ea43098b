use cxverb_core::CxTensor;

use crate::error::{Error, Result};

/// A fixed-length block of consecutive spectrogram frames, shaped
/// `(1, frames, F)`. The last block of an utterance is zero-padded and keeps
/// the count of real frames in `valid`.
#[derive(Clone, Debug)]
pub struct Chip {
    pub data: CxTensor<f64>,
    pub utterance: String,
    pub offset: usize,
    pub valid: usize,
}

impl Chip {
    pub fn frames(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn is_padded(&self) -> bool {
        self.valid < self.frames()
    }
}

/// Splits a `(1, 1, T, F)` spectrogram into non-overlapping chips of
/// `frames` frames.
pub fn chip(s: &CxTensor<f64>, frames: usize, utterance: &str) -> Result<Vec<Chip>> {
    let d = s.dims();
    if d.len() != 4 || d[0] != 1 || d[1] != 1 {
        return Err(Error::Shape(format!("expected a (1, 1, T, F) spectrogram, got {d:?}")));
    }
    if frames == 0 {
        return Err(Error::Config("chip length must be at least one frame".into()));
    }
    let (total, bins) = (d[2], d[3]);
    let mut out = Vec::with_capacity(total.div_ceil(frames));
    for offset in (0..total).step_by(frames) {
        let valid = frames.min(total - offset);
        let (mut re, mut im) = (vec![0.0; frames * bins], vec![0.0; frames * bins]);
        let range = offset * bins..(offset + valid) * bins;
        re[..valid * bins].copy_from_slice(&s.re().data()[range.clone()]);
        im[..valid * bins].copy_from_slice(&s.im().data()[range]);
        out.push(Chip {
            data: CxTensor::from_vecs([1, frames, bins], re, im)?,
            utterance: utterance.to_string(),
            offset,
            valid,
        });
    }
    Ok(out)
}

/// Reassembles chips (in order) into a `(1, 1, T, F)` spectrogram, dropping
/// padding frames.
pub fn dechip(chips: &[Chip]) -> Result<CxTensor<f64>> {
    let first = chips.first().ok_or_else(|| Error::Data("no chips to reassemble".into()))?;
    let bins = first.data.dims()[2];
    let total: usize = chips.iter().map(|c| c.valid).sum();
    let (mut re, mut im) = (Vec::with_capacity(total * bins), Vec::with_capacity(total * bins));
    let mut expected = first.offset;
    for c in chips {
        if c.data.dims()[2] != bins || c.offset != expected || c.valid > c.frames() {
            return Err(Error::Shape(format!(
                "chip at offset {} does not continue the sequence (expected offset {expected}, {bins} bins)",
                c.offset
            )));
        }
        re.extend_from_slice(&c.data.re().data()[..c.valid * bins]);
        im.extend_from_slice(&c.data.im().data()[..c.valid * bins]);
        expected += c.valid;
    }
    Ok(CxTensor::from_vecs([1, 1, total, bins], re, im)?)
}
