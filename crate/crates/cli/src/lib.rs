//! Reproducible pipelines around the dereverberation system: dataset
//! simulation, generator pretraining, adversarial training, enhancement,
//! evaluation and diagnostics, driven by one resolved run configuration.

pub mod cli;
pub mod config;
pub mod enhance;
pub mod features;
pub mod pipeline;

pub use cli::run;
pub use config::{Preset, RunConfig, UsageError};
