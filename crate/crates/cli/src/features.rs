//! Waveform to network-input analysis shared by training and enhancement.

use std::path::Path;

use anyhow::{Context, Result};
use cxverb_audio::dsp::{chip, optimal_smoothing, pre_emphasis, smoothed_input, stft};
use cxverb_audio::simulate::{read_manifest, UtteranceRecord, MANIFEST_NAME};
use cxverb_core::gan::Example;
use cxverb_core::CxTensor;
use rayon::prelude::*;

use crate::config::RunConfig;

/// Spectrogram of the pre-emphasized waveform, `(1, 1, T, F)`.
pub fn spectrum(wave: &[f64], cfg: &RunConfig) -> Result<CxTensor<f64>> {
    let emphasized = pre_emphasis(wave, cfg.pre_emphasis)?;
    Ok(stft(&emphasized, &cfg.stft)?)
}

/// Raw mixture spectrogram and the smoothed network input built from it.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub mixture: CxTensor<f64>,
    pub input: CxTensor<f64>,
}

pub fn analyze(wave: &[f64], cfg: &RunConfig) -> Result<Analysis> {
    let mixture = spectrum(wave, cfg)?;
    let smoothed = optimal_smoothing(&mixture, &cfg.smoothing)?;
    let input = smoothed_input(&mixture, &smoothed.power)?;
    Ok(Analysis { mixture, input })
}

/// Training chips of one reverberant/target pair.
pub fn pair_examples(y: &[f64], x: &[f64], utterance: usize, cfg: &RunConfig) -> Result<Vec<Example<f64>>> {
    let a = analyze(y, cfg)?;
    let target = spectrum(x, cfg)?;
    if target.dims() != a.mixture.dims() {
        anyhow::bail!(cxverb_audio::Error::Data(format!(
            "target spectrogram {:?} does not match mixture {:?}",
            target.dims(),
            a.mixture.dims()
        )));
    }
    let f = cfg.chip_frames;
    let tag = utterance.to_string();
    let (inputs, mixtures, targets) = (chip(&a.input, f, &tag)?, chip(&a.mixture, f, &tag)?, chip(&target, f, &tag)?);
    let bins = a.mixture.dims()[3];
    let as_image = |c: &CxTensor<f64>| c.reshape([1, 1, f, bins]);
    inputs
        .iter()
        .zip(&mixtures)
        .zip(&targets)
        .map(|((i, m), t)| {
            Ok(Example {
                input: as_image(&i.data)?,
                mixture: as_image(&m.data)?,
                target: as_image(&t.data)?,
                utterance,
            })
        })
        .collect()
}

/// Reads a dataset directory's manifest and turns every pair into chips,
/// in manifest order.
pub fn load_examples(
    data: &Path,
    cfg: &RunConfig,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<UtteranceRecord>, Vec<Example<f64>>)> {
    let manifest = data.join(MANIFEST_NAME);
    let records = read_manifest(&manifest)?;
    if records.is_empty() {
        anyhow::bail!(cxverb_audio::Error::Data(format!("{} lists no utterances", manifest.display())));
    }
    let per_utt: Vec<Vec<Example<f64>>> = pool.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let (y, x) = r.load(data)?;
                pair_examples(&y, &x, i, cfg).with_context(|| format!("preparing {}", r.id))
            })
            .collect::<Result<_>>()
    })?;
    let examples: Vec<_> = per_utt.into_iter().flatten().collect();
    log::info!("{} utterances, {} chips of {} frames", records.len(), examples.len(), cfg.chip_frames);
    Ok((records, examples))
}
