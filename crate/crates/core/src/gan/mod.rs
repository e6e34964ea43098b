//! Generator and patch discriminator, their losses, the optimizer, checkpoints
//! and the two training phases.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod discriminator;
pub mod generator;
pub mod loss;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use config::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
pub use discriminator::{DiscOutput, Discriminator};
pub use generator::{generator_param_count, Generator};
pub use train::{pretrain, train_gan, Example, GanModels, GanObserver, GanOutcome, LossRecord, Phase, PretrainOutcome};
