use crate::error::{Error, Result};
use crate::layers::BatchNormKind;

/// Generator topology.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    /// Number of encoder/decoder pairs.
    pub depth: usize,
    /// Channel counts `depth + 1` long, starting with the input channel.
    pub ladder: Vec<usize>,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    /// SkipConv blocks per skip connection, shallowest first (`depth - 1`
    /// entries; the bottleneck is a plain pass-through).
    pub sb_counts: Vec<usize>,
    pub sb_kernel: (usize, usize),
    /// 1-based encoder indices whose output passes through a TF-SA module.
    pub tfsa_encoder: Vec<usize>,
    /// 1-based decoder indices whose incoming features (the previous
    /// decoder's output) pass through a TF-SA module.
    pub tfsa_decoder: Vec<usize>,
    pub tfsa_scaled: bool,
    /// Compress the mask magnitude into `[0, 1)` with `M / (1 + |M|)`.
    pub bounded_mask: bool,
    pub batch_norm: BatchNormKind,
}

impl GeneratorConfig {
    pub fn paper() -> Self {
        Self {
            depth: 7,
            ladder: vec![1, 16, 32, 64, 128, 256, 512, 512],
            kernel: (5, 3),
            stride: (1, 2),
            padding: (2, 1),
            sb_counts: vec![8, 4, 4, 2, 2, 1],
            sb_kernel: (3, 3),
            tfsa_encoder: vec![2, 4, 6],
            tfsa_decoder: vec![6, 4, 2],
            tfsa_scaled: false,
            bounded_mask: false,
            batch_norm: BatchNormKind::Split,
        }
    }

    pub fn toy() -> Self {
        Self {
            depth: 3,
            ladder: vec![1, 8, 16, 32],
            sb_counts: vec![2, 1],
            tfsa_encoder: vec![2],
            tfsa_decoder: vec![2],
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.depth == 0 {
            return bad("generator depth must be positive".into());
        }
        if self.ladder.len() != self.depth + 1 {
            return bad(format!("channel ladder has {} entries, expected depth + 1 = {}", self.ladder.len(), self.depth + 1));
        }
        if self.ladder.contains(&0) {
            return bad("channel ladder entries must be positive".into());
        }
        if self.sb_counts.len() != self.depth - 1 {
            return bad(format!("sb_counts has {} entries, expected depth - 1 = {}", self.sb_counts.len(), self.depth - 1));
        }
        for &(a, b) in &[self.kernel, self.stride, self.sb_kernel] {
            if a == 0 || b == 0 {
                return bad("kernel and stride sizes must be positive".into());
            }
        }
        if self.sb_kernel.0 % 2 == 0 || self.sb_kernel.1 % 2 == 0 {
            return bad(format!("SkipConv kernel {:?} must be odd to preserve shape", self.sb_kernel));
        }
        if let Some(&i) = self.tfsa_encoder.iter().find(|&&i| i == 0 || i > self.depth) {
            return bad(format!("TF-SA encoder position {i} outside 1..={}", self.depth));
        }
        if let Some(&i) = self.tfsa_decoder.iter().find(|&&i| i == 0 || i >= self.depth) {
            return bad(format!("TF-SA decoder position {i} outside 1..={}", self.depth - 1));
        }
        Ok(())
    }

    pub fn tfsa_count(&self) -> usize {
        self.tfsa_encoder.len() + self.tfsa_decoder.len()
    }
}

/// Patch discriminator topology: four 4x4 stride-2 layers, one 3x3 layer and
/// a 1x1 output layer, all spectrally normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorConfig {
    /// Seven channel counts: the input channel then each layer's output.
    pub ladder: Vec<usize>,
    /// Batch normalization on layers 2 to 5.
    pub batch_norm: bool,
    pub power_iters_init: usize,
}

impl DiscriminatorConfig {
    pub const LAYERS: usize = 6;

    pub fn paper() -> Self {
        Self { ladder: vec![1, 16, 32, 64, 128, 128, 1], batch_norm: true, power_iters_init: 5 }
    }

    pub fn toy() -> Self {
        Self { ladder: vec![1, 8, 16, 32, 32, 32, 1], ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() != Self::LAYERS + 1 || self.ladder.contains(&0) {
            return Err(Error::Config(format!(
                "discriminator ladder must hold {} positive entries, got {:?}",
                Self::LAYERS + 1,
                self.ladder
            )));
        }
        Ok(())
    }
}

/// Loss weights, optimizer and schedule settings for both training phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Blend between the real/imaginary and magnitude L1 terms.
    pub lambda: f64,
    /// Adversarial weight.
    pub alpha: f64,
    /// Reconstruction weight; the feature loss gets `1 - alpha - beta`.
    pub beta: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub gan_epochs: usize,
    pub gan_lr_g: f64,
    pub gan_lr_d: f64,
    pub weight_decay_g: f64,
    pub weight_decay_d: f64,
    pub batch_size: usize,
    pub d_steps_per_g: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Fraction of utterances held out for the plateau rule.
    pub val_fraction: f64,
    /// Stop after this many optimizer steps regardless of epochs.
    pub max_steps: Option<usize>,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            alpha: 0.4,
            beta: 0.3,
            pretrain_epochs: 20,
            pretrain_lr: 1e-3,
            plateau_patience: 2,
            plateau_factor: 0.1,
            gan_epochs: 30,
            gan_lr_g: 1e-4,
            gan_lr_d: 1e-4,
            weight_decay_g: 1e-4,
            weight_decay_d: 1e-3,
            batch_size: 16,
            d_steps_per_g: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            val_fraction: 0.1,
            max_steps: None,
            checkpoint_every: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        super::loss::check_weights(self.alpha, self.beta)?;
        for (name, v) in [
            ("pretrain_lr", self.pretrain_lr),
            ("gan_lr_g", self.gan_lr_g),
            ("gan_lr_d", self.gan_lr_d),
            ("plateau_factor", self.plateau_factor),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.weight_decay_g < 0.0 || self.weight_decay_d < 0.0 {
            return bad("weight decay must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch size {} too small for batch normalization", self.batch_size));
        }
        if self.d_steps_per_g == 0 || self.checkpoint_every == 0 {
            return bad("d_steps_per_g and checkpoint_every must be positive".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        GeneratorConfig::paper().validate().unwrap();
        GeneratorConfig::toy().validate().unwrap();
        DiscriminatorConfig::paper().validate().unwrap();
        DiscriminatorConfig::toy().validate().unwrap();
        TrainConfig::default().validate().unwrap();
        let p = GeneratorConfig::paper();
        assert_eq!(p.sb_counts.iter().sum::<usize>(), 21);
        assert_eq!(p.tfsa_count(), 6);
        assert_eq!(GeneratorConfig::toy().tfsa_count(), 2);
    }

    #[test]
    fn wrong_lengths_rejected() {
        let mut c = GeneratorConfig::toy();
        c.sb_counts = vec![1];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = GeneratorConfig::toy();
        c.ladder.pop();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = GeneratorConfig::toy();
        c.tfsa_decoder = vec![3];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let t = TrainConfig { alpha: 0.8, beta: 0.3, ..TrainConfig::default() };
        assert!(matches!(t.validate(), Err(Error::Config(_))));
    }
}
