//! The subcommand pipelines. Each reads its inputs, writes everything under
//! the configured output directory and returns what it produced.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cxverb_audio::dsp::{magnitude_db, read_wav, stft, write_spectrogram_csv, write_spectrogram_pgm, write_wav};
use cxverb_audio::metrics::{evaluate_pair, MetricsReport};
use cxverb_audio::simulate::{
    plan_conditions, read_manifest, synthetic_sources, write_condition, write_manifest, Source, UtteranceRecord,
    AUDIO_DIR, MANIFEST_NAME,
};
use cxverb_audio::SAMPLE_RATE;
use cxverb_core::gan::train::{evaluate_ri_mag, write_loss_csv};
use cxverb_core::gan::{
    checkpoint, pretrain as pretrain_loop, train_gan, Discriminator, GanModels, GanObserver, GanOutcome, Generator,
    Phase, PretrainOutcome,
};
use cxverb_core::gradcheck::{run_suite, GradReport};
use cxverb_core::{Mode, ParamSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{RunConfig, UsageError};
use crate::enhance::{enhance_waveform, MaskSource};
use crate::features::load_examples;

pub const GENERATOR_CKPT: &str = "generator.ckpt";
pub const DISCRIMINATOR_CKPT: &str = "discriminator.ckpt";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const PRETRAIN_LOSS_CSV: &str = "pretrain_loss.csv";
pub const GAN_LOSS_CSV: &str = "gan_loss.csv";
pub const PATCH_ACCURACY_CSV: &str = "patch_accuracy.csv";
pub const ENHANCED_DIR: &str = "enhanced";
pub const METRICS_CSV: &str = "metrics.csv";

/// A numerical check that did not hold; maps to exit code 3 like a
/// non-finite training loss.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct NumericalFailure(pub String);

pub fn worker_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    fill(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

/// Simulates a dataset into the output directory: synthesized sources, or
/// the given mono 16 kHz WAVs, each under `cfg.conditions` conditions.
pub fn simulate(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<UtteranceRecord>> {
    let sources = if inputs.is_empty() {
        synthetic_sources(cfg.sources, cfg.source_seconds, cfg.seed)
    } else {
        inputs
            .iter()
            .map(|p| {
                let (samples, _) = read_wav(p)?;
                let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(Source { id, samples })
            })
            .collect::<Result<Vec<_>>>()?
    };
    let sim = cfg.sim_config();
    let plan = plan_conditions(&sources, cfg.conditions, &sim)?;
    create_dir(&cfg.out.join(AUDIO_DIR))?;
    let records = worker_pool(cfg)?.install(|| {
        plan.par_iter()
            .map(|c| write_condition(&cfg.out, &sources[c.source], c, &sim))
            .collect::<Result<Vec<_>, _>>()
    })?;
    write_manifest(&cfg.out.join(MANIFEST_NAME), &records)?;
    log::info!("simulated {} utterances into {}", records.len(), cfg.out.display());
    Ok(records)
}

pub fn build_generator(cfg: &RunConfig) -> Result<(Generator, ParamSet<f64>)> {
    let mut params = ParamSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e6e_0001);
    let gen = Generator::new(&cfg.generator_config(), &mut params, &mut rng)?;
    Ok((gen, params))
}

pub fn load_generator(cfg: &RunConfig, path: &Path) -> Result<(Generator, ParamSet<f64>)> {
    let (gen, mut params) = build_generator(cfg)?;
    checkpoint::load(path, &mut params).with_context(|| format!("loading generator {}", path.display()))?;
    Ok((gen, params))
}

pub fn build_discriminator(cfg: &RunConfig) -> Result<(Discriminator, ParamSet<f64>)> {
    let mut params = ParamSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e6e_0002);
    let disc = Discriminator::new(&cfg.discriminator_config(), &mut params, &mut rng)?;
    Ok((disc, params))
}

/// Result of the pretraining pipeline, with the reconstruction loss over
/// every training chip before and after (batch statistics, no updates).
pub struct PretrainRun {
    pub outcome: PretrainOutcome,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Trains the generator alone on the dataset in `data`; writes periodic and
/// final checkpoints and the loss log.
pub fn pretrain(cfg: &RunConfig, data: &Path) -> Result<PretrainRun> {
    let (_, examples) = load_examples(data, cfg, &worker_pool(cfg)?)?;
    let (gen, mut params) = build_generator(cfg)?;
    let train = cfg.train_config();
    let all: Vec<usize> = (0..examples.len()).collect();
    let full_loss = |p: &ParamSet<f64>| evaluate_ri_mag(&gen, p, &examples, &all, train.lambda, train.batch_size, Mode::Frozen);
    let initial_loss = full_loss(&params)?;
    let ckpt_dir = cfg.out.join(CHECKPOINT_DIR);
    create_dir(&ckpt_dir)?;
    let outcome = pretrain_loop(&gen, &mut params, &examples, &train, |step, p| {
        checkpoint::save(&ckpt_dir.join(format!("pretrain_{step:06}.ckpt")), p)
    })?;
    checkpoint::save(&cfg.out.join(GENERATOR_CKPT), &params)?;
    write_file(&cfg.out.join(PRETRAIN_LOSS_CSV), |w| write_loss_csv(w, &outcome.records))?;
    let final_loss = full_loss(&params)?;
    log::info!("pretraining done: L_rimag {initial_loss:.5} -> {final_loss:.5}");
    Ok(PretrainRun { outcome, initial_loss, final_loss })
}

/// Forwards update hooks to an inner observer and saves both networks at
/// every checkpoint step.
struct Checkpointing<'a> {
    dir: PathBuf,
    inner: &'a mut dyn GanObserver<f64>,
}

impl GanObserver<f64> for Checkpointing<'_> {
    fn before_step(&mut self, phase: Phase, gen: &ParamSet<f64>, disc: &ParamSet<f64>) {
        self.inner.before_step(phase, gen, disc);
    }

    fn after_step(&mut self, phase: Phase, gen: &ParamSet<f64>, disc: &ParamSet<f64>) {
        self.inner.after_step(phase, gen, disc);
    }

    fn checkpoint(&mut self, step: usize, gen: &ParamSet<f64>, disc: &ParamSet<f64>) -> cxverb_core::Result<()> {
        checkpoint::save(&self.dir.join(format!("gan_g_{step:06}.ckpt")), gen)?;
        checkpoint::save(&self.dir.join(format!("gan_d_{step:06}.ckpt")), disc)?;
        self.inner.checkpoint(step, gen, disc)
    }
}

/// Adversarial training from a pretrained generator checkpoint.
pub fn train(cfg: &RunConfig, data: &Path, init: &Path) -> Result<GanOutcome> {
    train_observed(cfg, data, init, &mut ())
}

/// [`train`] with a caller-supplied observer of every update.
pub fn train_observed(
    cfg: &RunConfig,
    data: &Path,
    init: &Path,
    observer: &mut dyn GanObserver<f64>,
) -> Result<GanOutcome> {
    let (_, examples) = load_examples(data, cfg, &worker_pool(cfg)?)?;
    let (gen, mut gen_params) = load_generator(cfg, init)?;
    let (disc, mut disc_params) = build_discriminator(cfg)?;
    let ckpt_dir = cfg.out.join(CHECKPOINT_DIR);
    create_dir(&ckpt_dir)?;
    let mut hooks = Checkpointing { dir: ckpt_dir, inner: observer };
    let models = GanModels { gen: &gen, gen_params: &mut gen_params, disc: &disc, disc_params: &mut disc_params };
    let outcome = train_gan(models, &examples, &cfg.train_config(), &mut hooks)?;
    checkpoint::save(&cfg.out.join(GENERATOR_CKPT), &gen_params)?;
    checkpoint::save(&cfg.out.join(DISCRIMINATOR_CKPT), &disc_params)?;
    write_file(&cfg.out.join(GAN_LOSS_CSV), |w| write_loss_csv(&mut *w, &outcome.records))?;
    write_file(&cfg.out.join(PATCH_ACCURACY_CSV), |w| {
        writeln!(w, "step,patch_accuracy")?;
        for (i, a) in outcome.patch_accuracy.iter().enumerate() {
            writeln!(w, "{},{a:.9e}", i + 1)?;
        }
        Ok(())
    })?;
    Ok(outcome)
}

/// Expands enhancement inputs: a dataset directory contributes its
/// manifest's reverberant files, any other directory its WAVs (sorted),
/// a file itself.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let manifest = p.join(MANIFEST_NAME);
            if manifest.is_file() {
                out.extend(read_manifest(&manifest)?.iter().map(|r| r.reverb_file(p)));
            } else {
                let mut wavs: Vec<PathBuf> = fs::read_dir(p)
                    .with_context(|| format!("listing {}", p.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                    .collect();
                wavs.sort();
                out.extend(wavs);
            }
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!(UsageError("no input WAV files given".into()));
    }
    Ok(out)
}

/// Dereverberates each input into `<out>/enhanced/<file name>`. Inputs are
/// only read; an output that would overwrite an input is an error.
pub fn enhance(cfg: &RunConfig, model: Option<&Path>, inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let files = expand_inputs(inputs)?;
    let dir = cfg.out.join(ENHANCED_DIR);
    create_dir(&dir)?;
    let canon_dir = dir.canonicalize()?;
    let mut outputs = Vec::with_capacity(files.len());
    for f in &files {
        let name = f.file_name().ok_or_else(|| UsageError(format!("{} is not a file", f.display())))?;
        let target = dir.join(name);
        if outputs.contains(&target) {
            bail!(UsageError(format!("two inputs share the file name {}", name.to_string_lossy())));
        }
        if f.canonicalize().ok().and_then(|c| c.parent().map(|p| p == canon_dir)).unwrap_or(false) {
            bail!(UsageError(format!("refusing to overwrite input {}", f.display())));
        }
        outputs.push(target);
    }
    let model = match (cfg.identity_mask, model) {
        (true, _) => None,
        (false, Some(path)) => Some(load_generator(cfg, path)?),
        (false, None) => bail!(UsageError("enhance needs --model unless --identity-mask is set".into())),
    };
    let source = match &model {
        Some((gen, params)) => MaskSource::Model { gen, params, batch: cfg.train.batch_size },
        None => MaskSource::Identity,
    };
    worker_pool(cfg)?.install(|| {
        files.par_iter().zip(&outputs).try_for_each(|(input, output)| -> Result<()> {
            let (y, _) = read_wav(input)?;
            let x = enhance_waveform(&y, &source, cfg).with_context(|| format!("enhancing {}", input.display()))?;
            write_wav(output, &x, SAMPLE_RATE)?;
            Ok(())
        })
    })?;
    log::info!("enhanced {} files into {}", files.len(), dir.display());
    Ok(outputs)
}

/// Scores the reverberant inputs and their enhanced versions against the
/// targets of the dataset in `data`; writes the CSV report.
pub fn evaluate(cfg: &RunConfig, data: &Path, enhanced: &Path) -> Result<MetricsReport> {
    let records = read_manifest(&data.join(MANIFEST_NAME))?;
    let rows = worker_pool(cfg)?.install(|| {
        records
            .par_iter()
            .map(|r| -> Result<_> {
                let (y, x) = r.load(data)?;
                let name = Path::new(&r.reverb_path).file_name().unwrap_or_default();
                let (e, _) = read_wav(enhanced.join(name))?;
                Ok([evaluate_pair(&r.id, "reverberant", &x, &y)?, evaluate_pair(&r.id, "enhanced", &x, &e)?])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let report = MetricsReport { rows: rows.into_iter().flatten().collect() };
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(METRICS_CSV), |w| report.write_csv(w))?;
    Ok(report)
}

/// Runs every registered finite-difference gradient check.
pub fn gradcheck(cfg: &RunConfig) -> Result<Vec<GradReport>> {
    let reports = run_suite(cfg.seed)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        for r in &reports {
            println!("{}", format_report(r));
        }
        bail!(NumericalFailure(format!("gradient check failed for {}", failed.join(", "))));
    }
    Ok(reports)
}

pub fn format_report(r: &GradReport) -> String {
    format!(
        "{:<24} {} max rel err {:.3e} (tol {:.0e}, {} entries)",
        r.name,
        if r.pass { "ok  " } else { "FAIL" },
        r.max_rel_err,
        r.tolerance,
        r.checked
    )
}

/// Writes `<stem>.csv` and `<stem>.pgm` log-magnitude spectrograms of each
/// WAV into the output directory.
pub fn export_spec(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let files = expand_inputs(inputs)?;
    create_dir(&cfg.out)?;
    let mut written = Vec::new();
    for f in &files {
        let (x, _) = read_wav(f)?;
        let db = magnitude_db(&stft(&x, &cfg.stft)?)?;
        let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let (csv, pgm) = (cfg.out.join(format!("{stem}.csv")), cfg.out.join(format!("{stem}.pgm")));
        write_file(&csv, |w| write_spectrogram_csv(w, &db))?;
        write_file(&pgm, |w| write_spectrogram_pgm(w, &db))?;
        written.extend([csv, pgm]);
    }
    Ok(written)
}
