use rand::Rng;

use crate::cx::CxVar;
use crate::error::{shape_err, Result};
use crate::gan::config::DiscriminatorConfig;
use crate::layers::{cx_leaky_relu, BatchNormKind, CxBatchNorm, CxConv, LEAKY_SLOPE};
use crate::params::{Binder, Mode, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct DiscLayer {
    pub conv: CxConv,
    pub bn: Option<CxBatchNorm>,
    pub activation: bool,
}

/// Complex patch discriminator. Scores are `|z| / (1 + |z|)` of the last
/// layer's complex output, one per patch.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub cfg: DiscriminatorConfig,
    pub layers: Vec<DiscLayer>,
}

/// Scores and per-layer feature maps of one discriminator pass.
pub struct DiscOutput {
    pub scores: Var,
    pub features: Vec<CxVar>,
}

impl Discriminator {
    pub fn new<T: Scalar, R: Rng + ?Sized>(cfg: &DiscriminatorConfig, params: &mut ParamSet<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let l = &cfg.ladder;
        let mut layers = Vec::with_capacity(DiscriminatorConfig::LAYERS);
        for i in 0..DiscriminatorConfig::LAYERS {
            let (kernel, stride, padding) = match i {
                0..=3 => ((4, 4), (2, 2), (1, 1)),
                4 => ((3, 3), (1, 1), (1, 1)),
                _ => ((1, 1), (1, 1), (0, 0)),
            };
            let name = format!("disc.l{}", i + 1);
            let conv = CxConv::new(params, &name, l[i], l[i + 1], kernel, stride, padding, false, true, rng)?
                .with_spectral_norm(params, &name, cfg.power_iters_init, rng)?;
            let bn = if cfg.batch_norm && (1..=4).contains(&i) {
                Some(CxBatchNorm::new(params, &format!("{name}.bn"), l[i + 1], BatchNormKind::Split)?)
            } else {
                None
            };
            layers.push(DiscLayer { conv, bn, activation: i + 1 < DiscriminatorConfig::LAYERS });
        }
        Ok(Self { cfg: cfg.clone(), layers })
    }

    /// Patch grid `(rows, cols)` for an input of extent `(t, f)`.
    pub fn patch_grid(&self, t: usize, f: usize) -> Result<(usize, usize)> {
        self.layers.iter().try_fold((t, f), |(t, f), l| l.conv.out_len(t, f))
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, s: CxVar) -> Result<DiscOutput> {
        let d = tape.cx_dims(s);
        if d.len() != 4 || d[1] != self.cfg.ladder[0] {
            return Err(shape_err!("discriminator expects (B,{},T,F), got {d:?}", self.cfg.ladder[0]));
        }
        self.patch_grid(d[2], d[3])?;
        let mut h = s;
        let mut features = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            h = l.conv.forward(tape, b, h)?;
            if let Some(bn) = &l.bn {
                h = bn.forward(tape, b, h)?;
            }
            if l.activation {
                h = cx_leaky_relu(tape, h, LEAKY_SLOPE);
            }
            features.push(h);
        }
        let mag = tape.cx_magnitude(h)?;
        let denom = tape.add_const(mag, T::one());
        let scores = tape.div(mag, denom)?;
        Ok(DiscOutput { scores, features })
    }

    /// One power iteration on every layer's spectral-norm vectors.
    pub fn power_step<T: Scalar>(&self, params: &mut ParamSet<T>) -> Result<()> {
        for l in &self.layers {
            if let Some(sn) = &l.conv.spectral {
                sn.step(params, 1)?;
            }
        }
        Ok(())
    }

    /// Value-level scores and feature maps.
    pub fn infer<T: Scalar>(&self, params: &ParamSet<T>, s: &CxTensor<T>, mode: Mode) -> Result<(Tensor<T>, Vec<CxTensor<T>>)> {
        let mut tape = Tape::new();
        let mut b = Binder::new(params, false, mode);
        let sv = tape.cx_constant(s);
        let out = self.forward(&mut tape, &mut b, sv)?;
        Ok((tape.value(out.scores).clone(), out.features.iter().map(|&f| tape.cx_value(f)).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::power_iteration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_scores_in_unit_interval_with_six_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut params = ParamSet::<f64>::new();
        let d = Discriminator::new(&DiscriminatorConfig::toy(), &mut params, &mut rng).unwrap();
        let s = CxTensor::randn([2, 1, 32, 257], 1.0, &mut rng).unwrap();
        let (scores, feats) = d.infer(&params, &s, Mode::Frozen).unwrap();
        assert_eq!(scores.dims(), &[2, 1, 2, 16]);
        assert_eq!(feats.len(), 6);
        assert!(scores.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn paper_grid_is_sixteen_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut params = ParamSet::<f32>::new();
        let d = Discriminator::new(&DiscriminatorConfig::paper(), &mut params, &mut rng).unwrap();
        assert_eq!(d.patch_grid(257, 257).unwrap(), (16, 16));
    }

    #[test]
    fn normalized_kernels_have_unit_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let mut params = ParamSet::<f64>::new();
        let d = Discriminator::new(&DiscriminatorConfig::toy(), &mut params, &mut rng).unwrap();
        for _ in 0..50 {
            d.power_step(&mut params).unwrap();
        }
        for l in &d.layers {
            let sn = l.conv.spectral.as_ref().unwrap();
            let w = params.get(l.conv.weight);
            let sigma = sn.sigma(&params);
            let scaled = CxTensor::new(w.re().map(|x| x / sigma), w.im().map(|x| x / sigma)).unwrap();
            let mut u = params.get(sn.u).re().data().to_vec();
            let mut v = params.get(sn.v).re().data().to_vec();
            let s = power_iteration(&scaled, &mut u, &mut v, 200).unwrap();
            assert!((s - 1.0).abs() < 0.05, "sigma after normalization {s}");
        }
    }
}
