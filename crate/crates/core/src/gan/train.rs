//! Generator pretraining and adversarial training loops.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::gan::adam::{AdamConfig, AdamState};
use crate::gan::config::TrainConfig;
use crate::gan::discriminator::Discriminator;
use crate::gan::generator::Generator;
use crate::gan::loss::{loss_feature, loss_generator_total, loss_lsgan_d, loss_lsgan_g, loss_ri_mag};
use crate::params::{Binder, Mode, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

/// One training chip: network input (smoothed), the raw mixture spectrogram
/// the mask is applied to, and the clean target, each `(1, 1, T, F)`.
#[derive(Clone, Debug)]
pub struct Example<T> {
    pub input: CxTensor<T>,
    pub mixture: CxTensor<T>,
    pub target: CxTensor<T>,
    /// Source utterance index, used for the validation split.
    pub utterance: usize,
}

/// Losses logged for one optimizer step; `None` where a loss does not apply
/// to the phase.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub l_d: Option<f64>,
    pub l_g: Option<f64>,
    pub l_rimag: Option<f64>,
    pub l_feat: Option<f64>,
}

pub const LOSS_CSV_HEADER: &str = "step,L_D,L_G,L_rimag,L_feat";

pub fn write_loss_csv<W: Write>(mut w: W, records: &[LossRecord]) -> std::io::Result<()> {
    writeln!(w, "{LOSS_CSV_HEADER}")?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.step, f(r.l_d), f(r.l_g), f(r.l_rimag), f(r.l_feat))?;
    }
    Ok(())
}

/// Stacks `(1, C, T, F)` tensors along the batch axis.
pub fn stack<T: Scalar>(items: &[&CxTensor<T>]) -> Result<CxTensor<T>> {
    let first = items.first().ok_or_else(|| Error::Data("cannot stack an empty batch".into()))?;
    let d = first.dims();
    if d[0] != 1 {
        return Err(shape_err!("stack expects batch-1 tensors, got {d:?}"));
    }
    let (mut re, mut im) = (Vec::with_capacity(first.numel() * items.len()), Vec::with_capacity(first.numel() * items.len()));
    for t in items {
        if t.dims() != d {
            return Err(shape_err!("cannot stack {:?} with {d:?}", t.dims()));
        }
        re.extend_from_slice(t.re().data());
        im.extend_from_slice(t.im().data());
    }
    let mut dims = d.to_vec();
    dims[0] = items.len();
    CxTensor::new(Tensor::from_vec(dims.clone(), re)?, Tensor::from_vec(dims, im)?)
}

struct Batch<T> {
    input: CxTensor<T>,
    mixture: CxTensor<T>,
    target: CxTensor<T>,
}

fn make_batch<T: Scalar>(data: &[Example<T>], idx: &[usize]) -> Result<Batch<T>> {
    let pick = |f: fn(&Example<T>) -> &CxTensor<T>| stack(&idx.iter().map(|&i| f(&data[i])).collect::<Vec<_>>());
    Ok(Batch { input: pick(|e| &e.input)?, mixture: pick(|e| &e.mixture)?, target: pick(|e| &e.target)? })
}

/// Endless stream of shuffled mini-batches; the final short batch of an
/// epoch is dropped unless it is the only one.
struct Batcher {
    order: Vec<usize>,
    batch: usize,
    pos: usize,
    epoch: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(pool: Vec<usize>, batch: usize, rng: ChaCha8Rng) -> Result<Self> {
        if pool.len() < 2 {
            return Err(Error::Data(format!("need at least 2 training chips, got {}", pool.len())));
        }
        let batch = batch.min(pool.len());
        let mut b = Self { order: pool, batch, pos: 0, epoch: 0, rng };
        b.order.shuffle(&mut b.rng);
        Ok(b)
    }

    fn batches_per_epoch(&self) -> usize {
        self.order.len() / self.batch
    }

    /// Next batch and whether it completes an epoch.
    fn next(&mut self) -> (Vec<usize>, bool) {
        let idx = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        let end = self.pos + self.batch > self.order.len();
        if end {
            self.pos = 0;
            self.epoch += 1;
            self.order.shuffle(&mut self.rng);
        }
        (idx, end)
    }
}

/// Learning-rate drop after `patience` consecutive epochs without a new best.
#[derive(Clone, Debug)]
pub struct Plateau {
    best: f64,
    stagnant: usize,
    patience: usize,
}

impl Plateau {
    pub fn new(patience: usize) -> Self {
        Self { best: f64::INFINITY, stagnant: 0, patience }
    }

    /// Records an epoch loss; returns true when the rate should drop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stagnant = 0;
            return false;
        }
        self.stagnant += 1;
        if self.stagnant >= self.patience {
            self.stagnant = 0;
            return true;
        }
        false
    }
}

fn finite(step: usize, name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { step, detail: format!("{name} = {v}") })
    }
}

fn value<T: Scalar>(tape: &Tape<T>, v: Var) -> f64 {
    tape.value(v).item().to_f64().unwrap()
}

/// Splits utterance indices into (train, validation) chip pools.
pub fn split_validation<T>(data: &[Example<T>], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut utts: Vec<usize> = data.iter().map(|e| e.utterance).collect();
    utts.sort_unstable();
    utts.dedup();
    let n_val = (fraction * utts.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7a11);
    utts.shuffle(&mut rng);
    let val: Vec<usize> = utts[..n_val].to_vec();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, e) in data.iter().enumerate() {
        if val.contains(&e.utterance) {
            held.push(i);
        } else {
            train.push(i);
        }
    }
    (train, held)
}

/// Mean reconstruction loss of the masked mixture over `idx`, without
/// recording gradients.
pub fn evaluate_ri_mag<T: Scalar>(
    gen: &Generator,
    params: &ParamSet<T>,
    data: &[Example<T>],
    idx: &[usize],
    lambda: f64,
    batch: usize,
    mode: Mode,
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Data("no chips to evaluate".into()));
    }
    let mut total = 0.0;
    for chunk in idx.chunks(batch.max(1)) {
        let bt = make_batch(data, chunk)?;
        let mut tape = Tape::new();
        let mut b = Binder::new(params, false, mode);
        let y = tape.cx_constant(&bt.input);
        let m = gen.forward(&mut tape, &mut b, y)?;
        let mix = tape.cx_constant(&bt.mixture);
        let xh = tape.cx_mul(m, mix)?;
        let x = tape.cx_constant(&bt.target);
        let l = loss_ri_mag(&mut tape, xh, x, lambda)?;
        total += value(&tape, l) * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64)
}

#[derive(Clone, Debug, Default)]
pub struct PretrainOutcome {
    pub records: Vec<LossRecord>,
    /// Per-epoch plateau metric (validation loss, or the mean training loss
    /// when no utterance is held out).
    pub epoch_losses: Vec<f64>,
    /// Steps at which the learning rate was divided.
    pub lr_drops: Vec<usize>,
    pub final_lr: f64,
}

/// Trains the generator alone on the blended real/imaginary and magnitude
/// loss. `on_checkpoint` runs every `cfg.checkpoint_every` steps and at the
/// end.
pub fn pretrain<T: Scalar>(
    gen: &Generator,
    params: &mut ParamSet<T>,
    data: &[Example<T>],
    cfg: &TrainConfig,
    mut on_checkpoint: impl FnMut(usize, &ParamSet<T>) -> Result<()>,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("pretraining dataset is empty".into()));
    }
    let (train, val) = split_validation(data, cfg.val_fraction, cfg.seed);
    let mut batcher = Batcher::new(train, cfg.batch_size, ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let total_steps = cfg.max_steps.unwrap_or(cfg.pretrain_epochs * batcher.batches_per_epoch());
    let mut adam = AdamState::new();
    let mut opt = AdamConfig {
        lr: cfg.pretrain_lr,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
        weight_decay: 0.0,
    };
    let mut plateau = Plateau::new(cfg.plateau_patience);
    let mut out = PretrainOutcome::default();
    let mut epoch_sum = 0.0;
    let mut epoch_n = 0usize;
    for step in 1..=total_steps {
        let (idx, epoch_end) = batcher.next();
        let bt = make_batch(data, &idx)?;
        let mut tape = Tape::new();
        let mut b = Binder::new(&*params, true, Mode::Train);
        let y = tape.cx_constant(&bt.input);
        let m = gen.forward(&mut tape, &mut b, y)?;
        let mix = tape.cx_constant(&bt.mixture);
        let xh = tape.cx_mul(m, mix)?;
        let x = tape.cx_constant(&bt.target);
        let loss = loss_ri_mag(&mut tape, xh, x, cfg.lambda)?;
        let l = finite(step, "L_rimag", value(&tape, loss))?;
        let grads = b.grads(&tape, &tape.backward(loss)?);
        let updates = b.take_buffer_updates();
        drop(b);
        params.apply_updates(updates);
        adam.step(params, &grads, &opt)?;
        out.records.push(LossRecord { step, l_d: None, l_g: None, l_rimag: Some(l), l_feat: None });
        epoch_sum += l;
        epoch_n += 1;
        if epoch_end {
            let metric = if val.is_empty() {
                epoch_sum / epoch_n as f64
            } else {
                evaluate_ri_mag(gen, params, data, &val, cfg.lambda, cfg.batch_size, Mode::Eval)?
            };
            out.epoch_losses.push(metric);
            if plateau.observe(metric) {
                opt.lr *= cfg.plateau_factor;
                out.lr_drops.push(step);
                log::info!("plateau after epoch {}: learning rate now {:.3e}", out.epoch_losses.len(), opt.lr);
            }
            (epoch_sum, epoch_n) = (0.0, 0);
        }
        if step % cfg.checkpoint_every == 0 || step == total_steps {
            on_checkpoint(step, params)?;
        }
        if step % 10 == 0 {
            log::debug!("pretrain step {step}: L_rimag {l:.5}");
        }
    }
    out.final_lr = opt.lr;
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct GanOutcome {
    pub records: Vec<LossRecord>,
    /// Fraction of correctly classified patches per step (real above 0.5,
    /// generated below), from the last discriminator update of the step.
    pub patch_accuracy: Vec<f64>,
}

/// Networks and parameters of the adversarial phase.
pub struct GanModels<'a, T> {
    pub gen: &'a Generator,
    pub gen_params: &'a mut ParamSet<T>,
    pub disc: &'a Discriminator,
    pub disc_params: &'a mut ParamSet<T>,
}

/// Hook called around every update; lets callers check which parameters a
/// step touched.
pub trait GanObserver<T> {
    fn before_step(&mut self, _phase: Phase, _gen: &ParamSet<T>, _disc: &ParamSet<T>) {}
    fn after_step(&mut self, _phase: Phase, _gen: &ParamSet<T>, _disc: &ParamSet<T>) {}
    fn checkpoint(&mut self, _step: usize, _gen: &ParamSet<T>, _disc: &ParamSet<T>) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Discriminator,
    Generator,
}

impl<T> GanObserver<T> for () {}

/// Alternates `d_steps_per_g` discriminator updates with one generator
/// update, each network frozen while the other trains. One step is one
/// generator update.
pub fn train_gan<T: Scalar>(
    models: GanModels<'_, T>,
    data: &[Example<T>],
    cfg: &TrainConfig,
    observer: &mut dyn GanObserver<T>,
) -> Result<GanOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    let GanModels { gen, gen_params, disc, disc_params } = models;
    let pool: Vec<usize> = (0..data.len()).collect();
    let mut batcher = Batcher::new(pool, cfg.batch_size, ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a4))?;
    let total_steps =
        cfg.max_steps.unwrap_or(cfg.gan_epochs * batcher.batches_per_epoch() / (cfg.d_steps_per_g + 1)).max(1);
    let opt = |lr, wd| AdamConfig { lr, beta1: cfg.adam_beta1, beta2: cfg.adam_beta2, eps: cfg.adam_eps, weight_decay: wd };
    let (opt_g, opt_d) = (opt(cfg.gan_lr_g, cfg.weight_decay_g), opt(cfg.gan_lr_d, cfg.weight_decay_d));
    let (mut adam_g, mut adam_d) = (AdamState::new(), AdamState::new());
    let mut out = GanOutcome::default();
    for step in 1..=total_steps {
        let mut l_d = 0.0;
        let mut acc = 0.0;
        for _ in 0..cfg.d_steps_per_g {
            observer.before_step(Phase::Discriminator, gen_params, disc_params);
            let bt = make_batch(data, &batcher.next().0)?;
            let fake = {
                let mut tape = Tape::new();
                let mut b = Binder::new(&*gen_params, false, Mode::Frozen);
                let y = tape.cx_constant(&bt.input);
                let m = gen.forward(&mut tape, &mut b, y)?;
                let mix = tape.cx_constant(&bt.mixture);
                let xh = tape.cx_mul(m, mix)?;
                tape.cx_value(xh)
            };
            let mut tape = Tape::new();
            let mut b = Binder::new(&*disc_params, true, Mode::Train);
            let real = tape.cx_constant(&bt.target);
            let fake = tape.cx_constant(&fake);
            let dr = disc.forward(&mut tape, &mut b, real)?;
            let df = disc.forward(&mut tape, &mut b, fake)?;
            let loss = loss_lsgan_d(&mut tape, dr.scores, df.scores)?;
            l_d = finite(step, "L_D", value(&tape, loss))?;
            acc = patch_accuracy(tape.value(dr.scores), tape.value(df.scores));
            let grads = b.grads(&tape, &tape.backward(loss)?);
            let updates = b.take_buffer_updates();
            drop(b);
            disc_params.apply_updates(updates);
            adam_d.step(disc_params, &grads, &opt_d)?;
            disc.power_step(disc_params)?;
            observer.after_step(Phase::Discriminator, gen_params, disc_params);
        }

        observer.before_step(Phase::Generator, gen_params, disc_params);
        let bt = make_batch(data, &batcher.next().0)?;
        let mut tape = Tape::new();
        let mut bg = Binder::new(&*gen_params, true, Mode::Train);
        let mut bd = Binder::new(&*disc_params, false, Mode::Frozen);
        let y = tape.cx_constant(&bt.input);
        let m = gen.forward(&mut tape, &mut bg, y)?;
        let mix = tape.cx_constant(&bt.mixture);
        let xh = tape.cx_mul(m, mix)?;
        let x = tape.cx_constant(&bt.target);
        let df = disc.forward(&mut tape, &mut bd, xh)?;
        let dr = disc.forward(&mut tape, &mut bd, x)?;
        let lg = loss_lsgan_g(&mut tape, df.scores);
        let lr = loss_ri_mag(&mut tape, xh, x, cfg.lambda)?;
        let lf = loss_feature(&mut tape, &dr.features, &df.features)?;
        let total = loss_generator_total(&mut tape, lg, lr, lf, cfg.alpha, cfg.beta)?;
        let rec = LossRecord {
            step,
            l_d: Some(l_d),
            l_g: Some(finite(step, "L_G", value(&tape, lg))?),
            l_rimag: Some(finite(step, "L_rimag", value(&tape, lr))?),
            l_feat: Some(finite(step, "L_feat", value(&tape, lf))?),
        };
        finite(step, "L_Gen", value(&tape, total))?;
        let grads = bg.grads(&tape, &tape.backward(total)?);
        let updates = bg.take_buffer_updates();
        drop((bg, bd));
        gen_params.apply_updates(updates);
        adam_g.step(gen_params, &grads, &opt_g)?;
        observer.after_step(Phase::Generator, gen_params, disc_params);

        if step % 10 == 0 {
            log::debug!("gan step {step}: L_D {l_d:.4} L_G {:.4} acc {acc:.3}", rec.l_g.unwrap());
        }
        out.records.push(rec);
        out.patch_accuracy.push(acc);
        if step % cfg.checkpoint_every == 0 || step == total_steps {
            observer.checkpoint(step, gen_params, disc_params)?;
        }
    }
    Ok(out)
}

fn patch_accuracy<T: Scalar>(real: &Tensor<T>, fake: &Tensor<T>) -> f64 {
    let half = T::lit(0.5);
    let hits = real.data().iter().filter(|&&s| s > half).count() + fake.data().iter().filter(|&&s| s < half).count();
    hits as f64 / (real.numel() + fake.numel()) as f64
}
