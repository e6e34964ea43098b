//! Run configuration: a plain-text `key = value` file plus command-line
//! overrides, resolved on top of a named preset.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cxverb_audio::dsp::{SmootherConfig, StftConfig, DEFAULT_PRE_EMPHASIS};
use cxverb_audio::simulate::{NoiseKind, SimConfig, TargetKind};
use cxverb_core::gan::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use thiserror::Error;

/// Name of the resolved configuration written into every output directory.
pub const RESOLVED_NAME: &str = "config.txt";

/// A malformed invocation or configuration; maps to exit code 1.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Toy,
    Paper,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Toy => "toy",
            Preset::Paper => "paper",
        }
    }
}

impl FromStr for Preset {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "toy" => Ok(Preset::Toy),
            "paper" => Ok(Preset::Paper),
            _ => Err(usage(format!("unknown preset `{s}` (expected toy or paper)"))),
        }
    }
}

/// Every setting of a run. Simulation, STFT, smoothing and training settings
/// are the library structs themselves; the global `seed` feeds both the
/// simulator and the trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads for per-file parallelism; 0 uses every core.
    pub workers: usize,
    /// Synthetic source utterances generated by `simulate`.
    pub sources: usize,
    /// Acoustic conditions simulated per source.
    pub conditions: usize,
    pub source_seconds: f64,
    pub sim: SimConfig,
    pub stft: StftConfig,
    pub smoothing: SmootherConfig,
    /// Pre-emphasis coefficient; 0 disables the filter.
    pub pre_emphasis: f64,
    /// Frames per training chip.
    pub chip_frames: usize,
    pub train: TrainConfig,
    pub bounded_mask: bool,
    pub tfsa_scaled: bool,
    /// Debug switch: enhance with a unit mask instead of the generator.
    pub identity_mask: bool,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (chip_frames, batch_size) = match preset {
            Preset::Toy => (32, 4),
            Preset::Paper => (257, 16),
        };
        Self {
            preset,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            sources: 8,
            conditions: 1,
            source_seconds: 3.0,
            sim: SimConfig::default(),
            stft: StftConfig::default(),
            smoothing: SmootherConfig::default(),
            pre_emphasis: DEFAULT_PRE_EMPHASIS,
            chip_frames,
            train: TrainConfig { batch_size, ..TrainConfig::default() },
            bounded_mask: false,
            tfsa_scaled: false,
            identity_mask: false,
        }
    }

    /// Resolves a configuration: the preset (flag first, then the file),
    /// then the file's keys, then `overrides` in order.
    pub fn resolve(
        file: Option<&Path>,
        preset: Option<Preset>,
        overrides: &[(String, String)],
    ) -> Result<Self, UsageError> {
        let entries = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_entries(&text).map_err(|e| usage(format!("{}: {}", path.display(), e.0)))?
            }
            None => Vec::new(),
        };
        let from_file = entries.iter().rev().find(|(k, _)| k == "preset").map(|(_, v)| v.parse()).transpose()?;
        let mut cfg = Self::preset(preset.or(from_file).unwrap_or(Preset::Toy));
        for (k, v) in entries.iter().chain(overrides) {
            if k == "preset" {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key; unknown keys and unparsable values are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let v = value.trim();
        match key {
            "preset" => *self = Self { preset: v.parse()?, ..self.clone() },
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = num(key, v)?,
            "sources" => self.sources = num(key, v)?,
            "conditions" => self.conditions = num(key, v)?,
            "source_seconds" => self.source_seconds = num(key, v)?,
            "t60" => self.sim.t60_range = parse_range(v)?,
            "direct_gain" => self.sim.direct_gain = num(key, v)?,
            "drr_db" => self.sim.drr_db = num(key, v)?,
            "early_ms" => self.sim.early_ms = num(key, v)?,
            "snr_db" => self.sim.snr_db = num(key, v)?,
            "rir_len" => self.sim.rir_len = num(key, v)?,
            "noise_kinds" => self.sim.noise_kinds = parse_noise_kinds(v)?,
            "target" => self.sim.target = parse_target(v)?,
            "n_fft" => self.stft.n_fft = num(key, v)?,
            "hop" => self.stft.hop = num(key, v)?,
            "sample_rate" => self.stft.sample_rate = num(key, v)?,
            "smooth_window" => self.smoothing.window_frames = num(key, v)?,
            "alpha_max" => self.smoothing.alpha_max = num(key, v)?,
            "floor_db" => self.smoothing.floor_db = num(key, v)?,
            "pre_emphasis" => self.pre_emphasis = num(key, v)?,
            "chip_frames" => self.chip_frames = num(key, v)?,
            "lambda" => self.train.lambda = num(key, v)?,
            "alpha" => self.train.alpha = num(key, v)?,
            "beta" => self.train.beta = num(key, v)?,
            "pretrain_epochs" => self.train.pretrain_epochs = num(key, v)?,
            "pretrain_lr" => self.train.pretrain_lr = num(key, v)?,
            "plateau_patience" => self.train.plateau_patience = num(key, v)?,
            "plateau_factor" => self.train.plateau_factor = num(key, v)?,
            "gan_epochs" => self.train.gan_epochs = num(key, v)?,
            "gan_lr_g" => self.train.gan_lr_g = num(key, v)?,
            "gan_lr_d" => self.train.gan_lr_d = num(key, v)?,
            "weight_decay_g" => self.train.weight_decay_g = num(key, v)?,
            "weight_decay_d" => self.train.weight_decay_d = num(key, v)?,
            "batch_size" => self.train.batch_size = num(key, v)?,
            "d_steps_per_g" => self.train.d_steps_per_g = num(key, v)?,
            "adam_beta1" => self.train.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.train.adam_beta2 = num(key, v)?,
            "adam_eps" => self.train.adam_eps = num(key, v)?,
            "val_fraction" => self.train.val_fraction = num(key, v)?,
            "max_steps" => self.train.max_steps = if v == "none" { None } else { Some(num(key, v)?) },
            "checkpoint_every" => self.train.checkpoint_every = num(key, v)?,
            "bounded_mask" => self.bounded_mask = num(key, v)?,
            "tfsa_scaled" => self.tfsa_scaled = num(key, v)?,
            "identity_mask" => self.identity_mask = num(key, v)?,
            _ => return Err(usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (s, t) = (&self.sim, &self.train);
        let kinds: Vec<&str> = s.noise_kinds.iter().map(|k| k.name()).collect();
        vec![
            ("preset", self.preset.name().into()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("workers", self.workers.to_string()),
            ("sources", self.sources.to_string()),
            ("conditions", self.conditions.to_string()),
            ("source_seconds", self.source_seconds.to_string()),
            ("t60", format!("{}:{}", s.t60_range.0, s.t60_range.1)),
            ("direct_gain", s.direct_gain.to_string()),
            ("drr_db", s.drr_db.to_string()),
            ("early_ms", s.early_ms.to_string()),
            ("snr_db", s.snr_db.to_string()),
            ("rir_len", s.rir_len.to_string()),
            ("noise_kinds", kinds.join(",")),
            ("target", target_name(s.target).into()),
            ("n_fft", self.stft.n_fft.to_string()),
            ("hop", self.stft.hop.to_string()),
            ("sample_rate", self.stft.sample_rate.to_string()),
            ("smooth_window", self.smoothing.window_frames.to_string()),
            ("alpha_max", self.smoothing.alpha_max.to_string()),
            ("floor_db", self.smoothing.floor_db.to_string()),
            ("pre_emphasis", self.pre_emphasis.to_string()),
            ("chip_frames", self.chip_frames.to_string()),
            ("lambda", t.lambda.to_string()),
            ("alpha", t.alpha.to_string()),
            ("beta", t.beta.to_string()),
            ("pretrain_epochs", t.pretrain_epochs.to_string()),
            ("pretrain_lr", t.pretrain_lr.to_string()),
            ("plateau_patience", t.plateau_patience.to_string()),
            ("plateau_factor", t.plateau_factor.to_string()),
            ("gan_epochs", t.gan_epochs.to_string()),
            ("gan_lr_g", t.gan_lr_g.to_string()),
            ("gan_lr_d", t.gan_lr_d.to_string()),
            ("weight_decay_g", t.weight_decay_g.to_string()),
            ("weight_decay_d", t.weight_decay_d.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("d_steps_per_g", t.d_steps_per_g.to_string()),
            ("adam_beta1", t.adam_beta1.to_string()),
            ("adam_beta2", t.adam_beta2.to_string()),
            ("adam_eps", t.adam_eps.to_string()),
            ("val_fraction", t.val_fraction.to_string()),
            ("max_steps", t.max_steps.map_or("none".into(), |n| n.to_string())),
            ("checkpoint_every", t.checkpoint_every.to_string()),
            ("bounded_mask", self.bounded_mask.to_string()),
            ("tfsa_scaled", self.tfsa_scaled.to_string()),
            ("identity_mask", self.identity_mask.to_string()),
        ]
    }

    /// The resolved configuration in the same format the parser reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RESOLVED_NAME), self.to_text())
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let lib = |e: &dyn std::fmt::Display| usage(format!("invalid configuration: {e}"));
        self.sim.validate().map_err(|e| lib(&e))?;
        self.stft.validate().map_err(|e| lib(&e))?;
        self.smoothing.validate().map_err(|e| lib(&e))?;
        self.train.validate().map_err(|e| lib(&e))?;
        self.generator_config().validate().map_err(|e| lib(&e))?;
        if self.stft.sample_rate != cxverb_audio::SAMPLE_RATE {
            return Err(usage(format!("sample_rate must be {} Hz", cxverb_audio::SAMPLE_RATE)));
        }
        if self.chip_frames == 0 || self.sources == 0 || self.conditions == 0 {
            return Err(usage("chip_frames, sources and conditions must be positive"));
        }
        if !(self.source_seconds > 0.0) {
            return Err(usage("source_seconds must be positive"));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(usage(format!("pre_emphasis {} outside [0, 1)", self.pre_emphasis)));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { seed: self.seed, ..self.sim.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        let base = match self.preset {
            Preset::Toy => GeneratorConfig::toy(),
            Preset::Paper => GeneratorConfig::paper(),
        };
        GeneratorConfig { bounded_mask: self.bounded_mask, tfsa_scaled: self.tfsa_scaled, ..base }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        match self.preset {
            Preset::Toy => DiscriminatorConfig::toy(),
            Preset::Paper => DiscriminatorConfig::paper(),
        }
    }
}

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String), UsageError> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("expected KEY=VALUE, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<V: FromStr>(key: &str, v: &str) -> Result<V, UsageError> {
    v.parse().map_err(|_| usage(format!("invalid value `{v}` for `{key}`")))
}

/// Parses `LO:HI` (or a single value for a fixed T60).
pub fn parse_range(v: &str) -> Result<(f64, f64), UsageError> {
    let (lo, hi) = v.split_once(':').unwrap_or((v, v));
    Ok((num("t60", lo.trim())?, num("t60", hi.trim())?))
}

fn parse_noise_kinds(v: &str) -> Result<Vec<NoiseKind>, UsageError> {
    let kinds = v
        .split(',')
        .map(|s| NoiseKind::parse(s.trim()).ok_or_else(|| usage(format!("unknown noise kind `{}`", s.trim()))))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(usage("noise_kinds must name at least one kind"));
    }
    Ok(kinds)
}

fn parse_target(v: &str) -> Result<TargetKind, UsageError> {
    match v {
        "direct" => Ok(TargetKind::Direct),
        "early" => Ok(TargetKind::Early),
        _ => Err(usage(format!("unknown target `{v}` (expected direct or early)"))),
    }
}

fn target_name(t: TargetKind) -> &'static str {
    match t {
        TargetKind::Direct => "direct",
        TargetKind::Early => "early",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_reparses_to_the_same_config() {
        let overrides = vec![
            ("seed".to_string(), "17".to_string()),
            ("t60".to_string(), "0.3:0.6".to_string()),
            ("max_steps".to_string(), "300".to_string()),
            ("noise_kinds".to_string(), "pink,white".to_string()),
        ];
        let cfg = RunConfig::resolve(None, Some(Preset::Toy), &overrides).unwrap();
        let mut back = RunConfig::preset(Preset::Toy);
        for (k, v) in parse_entries(&cfg.to_text()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::preset(Preset::Toy);
        assert!(cfg.set("learning_rate", "1e-3").is_err());
        assert!(cfg.set("seed", "seven").is_err());
        assert!(parse_entries("seed 7").is_err());
    }

    #[test]
    fn flags_override_file_and_preset_comes_first() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        fs::write(&path, "# experiment\nchip_frames = 64\npreset = paper\nseed = 3\n").unwrap();
        let cfg = RunConfig::resolve(Some(&path), None, &[("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.preset, Preset::Paper);
        assert_eq!(cfg.chip_frames, 64);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.batch_size, 16);
        let toy = RunConfig::resolve(Some(&path), Some(Preset::Toy), &[]).unwrap();
        assert_eq!(toy.preset, Preset::Toy);
        assert_eq!(toy.chip_frames, 64);
    }

    #[test]
    fn invalid_combinations_fail_validation() {
        assert!(RunConfig::resolve(None, None, &[("t60".into(), "0.8:0.2".into())]).is_err());
        assert!(RunConfig::resolve(None, None, &[("batch_size".into(), "1".into())]).is_err());
        assert!(RunConfig::resolve(None, None, &[("sample_rate".into(), "8000".into())]).is_err());
    }
}
