//! Dereverberation of whole utterances: analysis, chipped mask estimation,
//! complex ratio masking of the raw mixture and resynthesis.

use anyhow::Result;
use cxverb_audio::dsp::{apply_crm, chip, de_emphasis, dechip, istft, oracle_mask, Chip};
use cxverb_core::gan::train::stack;
use cxverb_core::gan::Generator;
use cxverb_core::{CxTensor, Mode, ParamSet};

use crate::config::RunConfig;
use crate::features::{analyze, spectrum, Analysis};

/// Where the complex ratio mask comes from.
pub enum MaskSource<'a> {
    /// The trained generator, run in inference mode.
    Model { gen: &'a Generator, params: &'a ParamSet<f64>, batch: usize },
    /// A unit mask; the output reproduces the input.
    Identity,
    /// The ideal mask `X / Y` against a known clean waveform.
    Oracle(&'a [f64]),
}

/// Estimates one mask per chip of the smoothed input.
fn mask_chips(a: &Analysis, source: &MaskSource<'_>, cfg: &RunConfig) -> Result<Vec<Chip>> {
    let frames = cfg.chip_frames;
    let mut chips = chip(&a.input, frames, "")?;
    let bins = a.input.dims()[3];
    match source {
        MaskSource::Identity => {
            for c in &mut chips {
                let ones = vec![1.0; frames * bins];
                c.data = CxTensor::from_vecs([1, frames, bins], ones, vec![0.0; frames * bins])?;
            }
        }
        MaskSource::Oracle(clean) => {
            let m = oracle_mask(&spectrum(clean, cfg)?, &a.mixture)?;
            for (c, mc) in chips.iter_mut().zip(chip(&m, frames, "")?) {
                c.data = mc.data;
            }
        }
        MaskSource::Model { gen, params, batch } => {
            for group in chips.chunks_mut((*batch).max(1)) {
                let images = group
                    .iter()
                    .map(|c| c.data.reshape([1, 1, frames, bins]))
                    .collect::<Result<Vec<_>, _>>()?;
                let masks = gen.infer(params, &stack(&images.iter().collect::<Vec<_>>())?, Mode::Eval)?;
                let n = frames * bins;
                let (re, im) = (masks.re().data(), masks.im().data());
                for (k, c) in group.iter_mut().enumerate() {
                    let span = k * n..(k + 1) * n;
                    c.data = CxTensor::from_vecs([1, frames, bins], re[span.clone()].to_vec(), im[span].to_vec())?;
                }
            }
        }
    }
    Ok(chips)
}

/// Dereverberates one waveform; the output has the input's length.
pub fn enhance_waveform(y: &[f64], source: &MaskSource<'_>, cfg: &RunConfig) -> Result<Vec<f64>> {
    let a = analyze(y, cfg)?;
    let mask = dechip(&mask_chips(&a, source, cfg)?)?;
    let estimate = apply_crm(&a.mixture, &mask)?;
    let emphasized = istft(&estimate, &cfg.stft, Some(y.len()))?;
    Ok(de_emphasis(&emphasized, cfg.pre_emphasis)?)
}
