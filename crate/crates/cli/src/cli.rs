//! Argument parsing, dispatch and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_override, RunConfig, UsageError};
use crate::pipeline::{self, NumericalFailure};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cxverb", version, about = "Complex-valued GAN speech dereverberation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand; each maps onto a config key.
#[derive(Debug, Args)]
struct Common {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Network and chip presets: toy or paper.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of synthetic source utterances.
    #[arg(long, global = true, value_name = "N")]
    n: Option<usize>,
    /// Reverberation time range in seconds.
    #[arg(long, global = true, value_name = "LO:HI")]
    t60: Option<String>,
    /// Noise level in dB.
    #[arg(long, global = true, value_name = "DB", allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Worker threads for per-file parallelism (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Debug: enhance with a unit mask instead of a trained generator.
    #[arg(long, global = true)]
    identity_mask: bool,
    /// Any configuration key, e.g. `--set max_steps=300`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a reverberant dataset and its manifest.
    Simulate {
        /// Dry mono 16 kHz source WAVs; synthesized speech when omitted.
        inputs: Vec<PathBuf>,
    },
    /// Pretrain the generator on the reconstruction loss.
    Pretrain {
        /// Dataset directory holding a manifest.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },
    /// Adversarial training from a pretrained generator.
    Train {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Pretrained generator checkpoint.
        #[arg(long, value_name = "PATH")]
        init: PathBuf,
    },
    /// Dereverberate WAV files, WAV directories or a dataset.
    Enhance {
        /// Generator checkpoint.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score reverberant and enhanced audio against the dataset targets.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Directory of enhanced WAVs named like the reverberant files.
        #[arg(long, value_name = "DIR")]
        enhanced: PathBuf,
    },
    /// Run the finite-difference gradient-check suite.
    Gradcheck,
    /// Write log-magnitude spectrograms as CSV and PGM.
    ExportSpec {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, UsageError> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("sources", self.n.map(|v| v.to_string()));
        push("t60", self.t60.clone());
        push("snr_db", self.snr.map(|v| v.to_string()));
        push("workers", self.workers.map(|v| v.to_string()));
        push("identity_mask", self.identity_mask.then(|| "true".to_string()));
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }

    fn resolve(&self) -> Result<RunConfig, UsageError> {
        let preset = self.preset.as_deref().map(str::parse).transpose()?;
        RunConfig::resolve(self.config.as_deref(), preset, &self.overrides()?)
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CXVERB_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).format_target(false).try_init();
}

/// Maps an error to its exit code by the first recognized cause.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    use cxverb_core::Error as CoreError;
    let core = |c: &CoreError| match c {
        CoreError::NonFiniteLoss { .. } => Some(EXIT_NUMERICAL),
        CoreError::Config(_) => Some(EXIT_USAGE),
        _ => None,
    };
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<NumericalFailure>() {
            return EXIT_NUMERICAL;
        }
        if let Some(code) = cause.downcast_ref::<CoreError>().and_then(core) {
            return code;
        }
        match cause.downcast_ref::<cxverb_audio::Error>() {
            Some(cxverb_audio::Error::Core(c)) => {
                if let Some(code) = core(c) {
                    return code;
                }
            }
            Some(cxverb_audio::Error::Config(_)) => return EXIT_USAGE,
            _ => {}
        }
    }
    EXIT_DATA
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = cli.common.resolve()?;
    cfg.write_resolved(&cfg.out)?;
    match cli.command {
        Command::Simulate { inputs } => {
            let records = pipeline::simulate(&cfg, &inputs)?;
            println!("{} utterances -> {}", records.len(), cfg.out.display());
        }
        Command::Pretrain { data } => {
            let run = pipeline::pretrain(&cfg, &data)?;
            println!(
                "{} steps, L_rimag {:.5} -> {:.5}, final lr {:.1e}",
                run.outcome.records.len(),
                run.initial_loss,
                run.final_loss,
                run.outcome.final_lr
            );
        }
        Command::Train { data, init } => {
            let outcome = pipeline::train(&cfg, &data, &init)?;
            if let Some(last) = outcome.records.last() {
                println!(
                    "{} steps, final L_D {:.5} L_G {:.5} L_rimag {:.5}",
                    last.step,
                    last.l_d.unwrap_or(f64::NAN),
                    last.l_g.unwrap_or(f64::NAN),
                    last.l_rimag.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Enhance { model, inputs } => {
            let written = pipeline::enhance(&cfg, model.as_deref(), &inputs)?;
            println!("{} files -> {}", written.len(), cfg.out.join(pipeline::ENHANCED_DIR).display());
        }
        Command::Evaluate { data, enhanced } => {
            let report = pipeline::evaluate(&cfg, &data, &enhanced)?;
            print!("{}", report.table());
        }
        Command::Gradcheck => {
            let reports = pipeline::gradcheck(&cfg)?;
            for r in &reports {
                println!("{}", pipeline::format_report(r));
            }
            println!("all {} gradient checks passed", reports.len());
        }
        Command::ExportSpec { inputs } => {
            for p in pipeline::export_spec(&cfg, &inputs)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
