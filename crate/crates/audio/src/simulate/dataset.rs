use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{read_wav, write_wav};
use crate::error::{Error, Result};
use crate::simulate::{derive_seed, generate_rir, reverberate_and_mix, synth_speech, Mix, NoiseKind, NoiseSpec, SimConfig, TargetKind};
use crate::SAMPLE_RATE;

pub const MANIFEST_NAME: &str = "manifest.jsonl";
/// Audio files live in this subdirectory of the dataset directory.
pub const AUDIO_DIR: &str = "audio";

/// One manifest row. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub reverb_path: String,
    pub target_path: String,
    pub t60_s: f64,
    pub snr_db: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

/// A dry source utterance.
#[derive(Clone, Debug)]
pub struct Source {
    pub id: String,
    pub samples: Vec<f64>,
}

/// A planned simulation of one source under one acoustic condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub id: String,
    pub source: usize,
    pub t60_s: f64,
    pub snr_db: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

/// `n` synthesized speech sources of `duration` seconds.
pub fn synthetic_sources(n: usize, duration: f64, seed: u64) -> Vec<Source> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ 0x5eed_5eed, i as u64));
            Source { id: format!("src{i:04}"), samples: synth_speech(duration, &mut rng) }
        })
        .collect()
}

/// Draws `n_conditions` conditions per source from per-item seeds.
pub fn plan_conditions(sources: &[Source], n_conditions: usize, cfg: &SimConfig) -> Result<Vec<Condition>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(sources.len() * n_conditions);
    for (si, src) in sources.iter().enumerate() {
        for c in 0..n_conditions {
            let seed = derive_seed(cfg.seed, (si * n_conditions + c) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (lo, hi) = cfg.t60_range;
            let t60_s = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let noise_kind = cfg.noise_kinds[rng.gen_range(0..cfg.noise_kinds.len())];
            out.push(Condition { id: format!("{}_c{c}", src.id), source: si, t60_s, snr_db: cfg.snr_db, noise_kind, seed });
        }
    }
    Ok(out)
}

/// Simulates one condition; depends only on the source and the condition.
pub fn render_condition(source: &Source, cond: &Condition, cfg: &SimConfig) -> Result<Mix> {
    let mut rng = ChaCha8Rng::seed_from_u64(cond.seed);
    rng.set_stream(1);
    let h = generate_rir(cfg, cond.t60_s, &mut rng)?;
    let taps = match cfg.target {
        TargetKind::Direct => 1,
        TargetKind::Early => cfg.early_samples() + 1,
    };
    let noise = NoiseSpec { kind: cond.noise_kind, snr_db: cond.snr_db };
    rng.set_stream(2);
    reverberate_and_mix(&source.samples, &h, Some(noise), taps, &mut rng)
        .map_err(|e| Error::Data(format!("{}: {e}", cond.id)))
}

fn relative_paths(cond: &Condition) -> (String, String) {
    (format!("{AUDIO_DIR}/{}_reverb.wav", cond.id), format!("{AUDIO_DIR}/{}_target.wav", cond.id))
}

/// Renders one condition and writes its pair of WAVs under `dir`.
pub fn write_condition(dir: &Path, source: &Source, cond: &Condition, cfg: &SimConfig) -> Result<UtteranceRecord> {
    let mix = render_condition(source, cond, cfg)?;
    let (reverb_path, target_path) = relative_paths(cond);
    write_wav(dir.join(&reverb_path), &mix.reverberant, SAMPLE_RATE)?;
    write_wav(dir.join(&target_path), &mix.target, SAMPLE_RATE)?;
    Ok(UtteranceRecord {
        id: cond.id.clone(),
        reverb_path,
        target_path,
        t60_s: cond.t60_s,
        snr_db: cond.snr_db,
        noise_kind: cond.noise_kind,
        seed: cond.seed,
    })
}

/// Simulates every source under `n_conditions` conditions, writing WAVs
/// and the manifest into `dir`.
pub fn build_dataset(sources: &[Source], cfg: &SimConfig, n_conditions: usize, dir: &Path) -> Result<Vec<UtteranceRecord>> {
    if sources.is_empty() {
        return Err(Error::Data("at least one source utterance is required".into()));
    }
    let plan = plan_conditions(sources, n_conditions, cfg)?;
    let audio = dir.join(AUDIO_DIR);
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let records = plan.iter().map(|c| write_condition(dir, &sources[c.source], c, cfg)).collect::<Result<Vec<_>>>()?;
    write_manifest(&dir.join(MANIFEST_NAME), &records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

impl UtteranceRecord {
    /// Loads `(reverberant, target)` waveforms, resolving paths against the
    /// manifest directory.
    pub fn load(&self, dir: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
        let (y, _) = read_wav(dir.join(&self.reverb_path))?;
        let (x, _) = read_wav(dir.join(&self.target_path))?;
        Ok((y, x))
    }

    pub fn reverb_file(&self, dir: &Path) -> PathBuf {
        dir.join(&self.reverb_path)
    }
}
