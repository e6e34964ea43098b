//! Named differentiable cases and a central-finite-difference checker.
//!
//! Every case builds a small network fragment from random complex inputs and
//! parameters; the checker compares the tape gradient of a fixed random
//! projection of the output against finite differences of the same scalar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cx::CxVar;
use crate::error::{Error, Result};
use crate::gan::loss;
use crate::gan::{Discriminator, DiscriminatorConfig};
use crate::kernels::ConvSpec;
use crate::layers::{
    cx_leaky_relu, BatchNormKind, CxBatchNorm, CxConv, DecoderBlock, EncoderBlock, SkipConvBlock, LEAKY_SLOPE,
};
use crate::params::{Binder, Mode, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::{CxTensor, Tensor};
use crate::tfsa::{Axis, Tfsa};

/// Output of a case: a real or complex node.
#[derive(Clone, Copy, Debug)]
pub enum Out {
    Real(Var),
    Cx(CxVar),
}

type Forward = Box<dyn Fn(&mut Tape<f64>, &mut Binder<f64>, &[CxVar]) -> Result<Out>>;

/// Inputs, parameters and forward function of one case.
pub struct Setup {
    pub inputs: Vec<CxTensor<f64>>,
    pub params: ParamSet<f64>,
    pub forward: Forward,
}

/// A registered case.
pub struct Case {
    pub name: &'static str,
    /// Built from several layers; checked at the looser tolerance.
    pub composite: bool,
    build: fn(&mut ChaCha8Rng) -> Result<Setup>,
}

#[derive(Clone, Debug)]
pub struct GradReport {
    pub name: String,
    /// Largest `|analytic - numeric|` over all entries, each divided by the
    /// largest gradient magnitude of the tensor it belongs to (at least
    /// `1e-3` of the largest gradient entry of the case).
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub pass: bool,
}

pub const STEP: f64 = 1e-5;
pub const TOL_PRIMITIVE: f64 = 1e-5;
pub const TOL_COMPOSITE: f64 = 1e-4;

fn randn(rng: &mut ChaCha8Rng, dims: &[usize]) -> Result<CxTensor<f64>> {
    CxTensor::randn(dims.to_vec(), 1.0, rng)
}

fn setup(inputs: Vec<CxTensor<f64>>, params: ParamSet<f64>, forward: Forward) -> Result<Setup> {
    Ok(Setup { inputs, params, forward })
}

fn leaf(rng: &mut ChaCha8Rng, shapes: &[&[usize]], f: Forward) -> Result<Setup> {
    let inputs = shapes.iter().map(|d| randn(rng, d)).collect::<Result<Vec<_>>>()?;
    setup(inputs, ParamSet::new(), f)
}

fn conv_layer(rng: &mut ChaCha8Rng, transposed: bool, spectral: bool) -> Result<Setup> {
    let mut params = ParamSet::new();
    let (stride, pad) = if transposed { ((1, 2), (1, 1)) } else { ((1, 1), (1, 1)) };
    let mut conv = CxConv::new(&mut params, "c", 1, 2, (3, 3), stride, pad, transposed, true, rng)?;
    if spectral {
        conv = conv.with_spectral_norm(&mut params, "c", 5, rng)?;
    }
    // non-zero bias so its gradient is exercised away from the origin
    let bias = conv.bias.unwrap();
    params.set(bias, randn(rng, &[2])?);
    let x = randn(rng, &[1, 1, 4, 4])?;
    setup(
        vec![x],
        params,
        Box::new(move |t, b, x| {
            Ok(Out::Cx(if conv.transposed { conv.forward_to(t, b, x[0], (4, 7))? } else { conv.forward(t, b, x[0])? }))
        }),
    )
}

fn registry() -> Vec<Case> {
    macro_rules! case {
        ($name:expr, $composite:expr, $build:expr) => {
            Case { name: $name, composite: $composite, build: $build }
        };
    }
    vec![
        case!("cx_add", false, |r| leaf(r, &[&[2, 3], &[1, 3]], Box::new(|t, _, x| Ok(Out::Cx(t.cx_add(x[0], x[1])?))))),
        case!("cx_sub", false, |r| leaf(r, &[&[2, 3], &[2, 1]], Box::new(|t, _, x| Ok(Out::Cx(t.cx_sub(x[0], x[1])?))))),
        case!("cx_mul", false, |r| leaf(r, &[&[2, 3], &[2, 3]], Box::new(|t, _, x| Ok(Out::Cx(t.cx_mul(x[0], x[1])?))))),
        case!("cx_matmul", false, |r| {
            leaf(r, &[&[2, 3, 4], &[2, 4, 2]], Box::new(|t, _, x| Ok(Out::Cx(t.cx_matmul(x[0], x[1], false)?))))
        }),
        case!("cx_matmul_conj", false, |r| {
            leaf(r, &[&[1, 3, 4], &[1, 2, 4]], Box::new(|t, _, x| Ok(Out::Cx(t.cx_matmul(x[0], x[1], true)?))))
        }),
        case!("cx_magnitude", false, |r| leaf(r, &[&[3, 4]], Box::new(|t, _, x| Ok(Out::Real(t.cx_magnitude(x[0])?))))),
        case!("reshape_permute", false, |r| {
            leaf(
                r,
                &[&[1, 2, 3, 4]],
                Box::new(|t, _, x| {
                    let p = t.cx_permute(x[0], &[0, 2, 1, 3])?;
                    Ok(Out::Cx(t.cx_reshape(p, &[1, 3, 8])?))
                }),
            )
        }),
        case!("concat_slice", false, |r| {
            leaf(
                r,
                &[&[1, 2, 3], &[1, 1, 3]],
                Box::new(|t, _, x| {
                    let c = t.cx_concat(&[x[0], x[1]], 1)?;
                    Ok(Out::Cx(t.cx_slice(c, 1, 1, 2)?))
                }),
            )
        }),
        case!("div", false, |r| {
            leaf(
                r,
                &[&[2, 3], &[2, 3]],
                Box::new(|t, _, x| {
                    let d = t.add_const(x[1].re, 4.0);
                    Ok(Out::Real(t.div(x[0].re, d)?))
                }),
            )
        }),
        case!("sigmoid", false, |r| leaf(r, &[&[5]], Box::new(|t, _, x| Ok(Out::Real(t.sigmoid(x[0].re)))))),
        case!("softmax", false, |r| leaf(r, &[&[2, 5]], Box::new(|t, _, x| Ok(Out::Real(t.softmax(x[0].re)))))),
        case!("cx_leaky_relu", false, |r| {
            leaf(r, &[&[2, 6]], Box::new(|t, _, x| Ok(Out::Cx(cx_leaky_relu(t, x[0], LEAKY_SLOPE)))))
        }),
        case!("cx_conv2d_raw", false, |r| {
            leaf(
                r,
                &[&[1, 1, 4, 4], &[1, 1, 3, 3]],
                Box::new(|t, _, x| {
                    Ok(Out::Cx(t.cx_conv2d(x[0], x[1], None, ConvSpec { stride: (1, 1), padding: (1, 1) })?))
                }),
            )
        }),
        case!("cx_conv2d", false, |r| conv_layer(r, false, false)),
        case!("cx_conv_transpose2d", false, |r| conv_layer(r, true, false)),
        case!("spectral_conv", false, |r| conv_layer(r, false, true)),
        case!("cx_batchnorm", false, |r| {
            let mut params = ParamSet::new();
            let bn = CxBatchNorm::new(&mut params, "bn", 2, BatchNormKind::Split)?;
            params.set(bn.gamma, randn(r, &[2])?);
            params.set(bn.beta, randn(r, &[2])?);
            setup(vec![randn(r, &[2, 2, 2, 3])?], params, Box::new(move |t, b, x| Ok(Out::Cx(bn.forward(t, b, x[0])?))))
        }),
        case!("cx_batchnorm_eval", false, |r| {
            let mut params = ParamSet::new();
            let bn = CxBatchNorm::new(&mut params, "bn", 2, BatchNormKind::Split)?;
            params.set(bn.gamma, randn(r, &[2])?);
            setup(
                vec![randn(r, &[1, 2, 2, 3])?],
                params,
                Box::new(move |t, b, x| {
                    b.mode = Mode::Eval;
                    Ok(Out::Cx(bn.forward(t, b, x[0])?))
                }),
            )
        }),
        case!("skipconv_block", true, |r| {
            let mut params = ParamSet::new();
            let blk = SkipConvBlock::new(&mut params, "sb", 2, (3, 3), (1, 1), (1, 1), BatchNormKind::Split, r)?;
            setup(vec![randn(r, &[2, 2, 3, 4])?], params, Box::new(move |t, b, x| Ok(Out::Cx(blk.forward(t, b, x[0])?))))
        }),
        case!("encoder_block", true, |r| {
            let mut params = ParamSet::new();
            let e = EncoderBlock::new(&mut params, "e", 1, 2, (3, 3), (1, 2), (1, 1), BatchNormKind::Split, r)?;
            setup(vec![randn(r, &[2, 1, 3, 5])?], params, Box::new(move |t, b, x| Ok(Out::Cx(e.forward(t, b, x[0])?))))
        }),
        case!("decoder_block", true, |r| {
            let mut params = ParamSet::new();
            let d = DecoderBlock::new(&mut params, "d", 4, 1, (3, 3), (1, 2), (1, 1), false, BatchNormKind::Split, r)?;
            setup(
                vec![randn(r, &[2, 2, 3, 3])?, randn(r, &[2, 2, 3, 3])?],
                params,
                Box::new(move |t, b, x| Ok(Out::Cx(d.forward(t, b, x[0], Some(x[1]), (3, 5))?))),
            )
        }),
        case!("sa_time", true, |r| tfsa_case(r, Some(Axis::Time))),
        case!("sa_freq", true, |r| tfsa_case(r, Some(Axis::Freq))),
        case!("tf_sa", true, |r| tfsa_case(r, None)),
        case!("loss_ri_mag", false, |r| {
            leaf(r, &[&[1, 1, 3, 4], &[1, 1, 3, 4]], Box::new(|t, _, x| Ok(Out::Real(loss::loss_ri_mag(t, x[0], x[1], 0.3)?))))
        }),
        case!("loss_lsgan_d", false, |r| {
            leaf(
                r,
                &[&[1, 1, 2, 2], &[1, 1, 2, 2]],
                Box::new(|t, _, x| {
                    let (a, b) = (t.sigmoid(x[0].re), t.sigmoid(x[1].re));
                    Ok(Out::Real(loss::loss_lsgan_d(t, a, b)?))
                }),
            )
        }),
        case!("loss_lsgan_g", false, |r| {
            leaf(
                r,
                &[&[1, 1, 2, 2]],
                Box::new(|t, _, x| {
                    let a = t.sigmoid(x[0].re);
                    Ok(Out::Real(loss::loss_lsgan_g(t, a)))
                }),
            )
        }),
        case!("loss_feature", false, |r| {
            leaf(
                r,
                &[&[1, 2, 2, 2], &[1, 2, 2, 2], &[1, 1, 3, 1], &[1, 1, 3, 1]],
                Box::new(|t, _, x| Ok(Out::Real(loss::loss_feature(t, &[x[0], x[2]], &[x[1], x[3]])?))),
            )
        }),
        case!("loss_generator_total", false, |r| {
            leaf(
                r,
                &[&[1], &[1], &[1]],
                Box::new(|t, _, x| {
                    Ok(Out::Real(loss::loss_generator_total(t, x[0].re, x[1].re, x[2].re, 0.4, 0.3)?))
                }),
            )
        }),
        case!("discriminator", true, |r| {
            let mut params = ParamSet::new();
            let cfg = DiscriminatorConfig { ladder: vec![1, 2, 2, 2, 2, 2, 1], batch_norm: true, power_iters_init: 5 };
            let d = Discriminator::new(&cfg, &mut params, r)?;
            setup(
                vec![randn(r, &[2, 1, 16, 16])?],
                params,
                Box::new(move |t, b, x| Ok(Out::Real(d.forward(t, b, x[0])?.scores))),
            )
        }),
    ]
}

fn tfsa_case(r: &mut ChaCha8Rng, axis: Option<Axis>) -> Result<Setup> {
    let mut params = ParamSet::new();
    let m = Tfsa::new(&mut params, "sa", 2, false, r)?;
    let x = randn(r, &[1, 2, 4, 4])?;
    setup(
        vec![x],
        params,
        Box::new(move |t, b, x| {
            Ok(Out::Cx(match axis {
                Some(Axis::Time) => m.time.forward(t, b, x[0], Axis::Time, m.scaled)?.0,
                Some(Axis::Freq) => m.freq.forward(t, b, x[0], Axis::Freq, m.scaled)?.0,
                None => m.forward(t, b, x[0])?,
            }))
        }),
    )
}

/// Names of every registered case, in suite order.
pub fn registered() -> Vec<&'static str> {
    registry().iter().map(|c| c.name).collect()
}

fn find(name: &str) -> Result<Case> {
    registry().into_iter().find(|c| c.name == name).ok_or_else(|| Error::UnsupportedOp(name.to_string()))
}

/// Runs the named case forward on its default random inputs. Returns the
/// output (complex; real outputs have a zero imaginary plane) and the tape.
pub fn tape_forward(name: &str, seed: u64) -> Result<(CxTensor<f64>, Tape<f64>)> {
    let case = find(name)?;
    let s = (case.build)(&mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut tape = Tape::new();
    let mut b = Binder::new(&s.params, true, Mode::Train);
    let xs: Vec<CxVar> = s.inputs.iter().map(|x| tape.cx_param(x)).collect();
    let out = match (s.forward)(&mut tape, &mut b, &xs)? {
        Out::Cx(v) => tape.cx_value(v),
        Out::Real(v) => CxTensor::from_real(tape.value(v).clone()),
    };
    Ok((out, tape))
}

/// Scalar objective: a fixed random weighting of every output entry.
struct Objective {
    wr: Tensor<f64>,
    wi: Tensor<f64>,
}

impl Objective {
    fn apply(&self, tape: &mut Tape<f64>, out: Out) -> Result<Var> {
        match out {
            Out::Real(v) => {
                let w = tape.constant(self.wr.reshape(tape.value(v).dims().to_vec())?);
                let p = tape.mul(v, w)?;
                Ok(tape.sum(p))
            }
            Out::Cx(v) => {
                let dims = tape.value(v.re).dims().to_vec();
                let wr = tape.constant(self.wr.reshape(dims.clone())?);
                let wi = tape.constant(self.wi.reshape(dims)?);
                let (pr, pi) = (tape.mul(v.re, wr)?, tape.mul(v.im, wi)?);
                let (sr, si) = (tape.sum(pr), tape.sum(pi));
                tape.add(sr, si)
            }
        }
    }
}

fn evaluate(s: &Setup, inputs: &[CxTensor<f64>], params: &ParamSet<f64>, obj: &Objective) -> Result<f64> {
    let mut tape = Tape::new();
    let mut b = Binder::new(params, true, Mode::Train);
    let xs: Vec<CxVar> = inputs.iter().map(|x| tape.cx_param(x)).collect();
    let out = (s.forward)(&mut tape, &mut b, &xs)?;
    let l = obj.apply(&mut tape, out)?;
    Ok(tape.value(l).item())
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Error of one tensor's gradient relative to its largest entry. Tensors
/// whose true gradient vanishes (a bias followed by batch normalization) are
/// measured against `floor` instead.
fn rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let scale = max_abs(analytic).max(max_abs(numeric)).max(floor);
    if scale == 0.0 {
        return 0.0;
    }
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / scale).fold(0.0, f64::max)
}

/// Fraction of the largest gradient entry of a case used as the minimum
/// scale of any single tensor.
const SCALE_FLOOR: f64 = 1e-3;

/// Compares tape gradients with central differences for every real and
/// imaginary entry of the case's inputs and trainable parameters.
pub fn grad_check(name: &str, seed: u64, tolerance: Option<f64>) -> Result<GradReport> {
    let case = find(name)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (case.build)(&mut rng)?;
    let tolerance = tolerance.unwrap_or(if case.composite { TOL_COMPOSITE } else { TOL_PRIMITIVE });

    let mut tape = Tape::new();
    let mut b = Binder::new(&s.params, true, Mode::Train);
    let xs: Vec<CxVar> = s.inputs.iter().map(|x| tape.cx_param(x)).collect();
    let out = (s.forward)(&mut tape, &mut b, &xs)?;
    let n_out = match out {
        Out::Real(v) => tape.value(v).numel(),
        Out::Cx(v) => tape.value(v.re).numel(),
    };
    let obj = Objective { wr: Tensor::randn([n_out], 1.0, &mut rng)?, wi: Tensor::randn([n_out], 1.0, &mut rng)? };
    let loss = obj.apply(&mut tape, out)?;
    let g = tape.backward(loss)?;
    let param_grads = b.grads(&tape, &g);
    drop(b);

    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let fd = |inputs: &[CxTensor<f64>], params: &ParamSet<f64>| evaluate(&s, inputs, params, &obj);

    for (k, x) in xs.iter().enumerate() {
        for (plane, var) in [(0, x.re), (1, x.im)] {
            let analytic = g.get_or_zeros(var, tape.value(var).shape()).into_vec();
            let mut numeric = vec![0.0; analytic.len()];
            for (e, slot) in numeric.iter_mut().enumerate() {
                let mut shifted = s.inputs.clone();
                let mut at = |delta: f64| -> Result<f64> {
                    let mut t = s.inputs[k].clone();
                    let (re, im) = t.planes_mut();
                    let p = if plane == 0 { re } else { im };
                    p[e] += delta;
                    shifted[k] = t;
                    fd(&shifted, &s.params)
                };
                *slot = (at(STEP)? - at(-STEP)?) / (2.0 * STEP);
            }
            pairs.push((analytic, numeric));
        }
    }
    for (id, grad) in s.params.ids().zip(&param_grads) {
        let Some(grad) = grad else { continue };
        for plane in 0..2 {
            let analytic = if plane == 0 { grad.re().data().to_vec() } else { grad.im().data().to_vec() };
            let mut numeric = vec![0.0; analytic.len()];
            for (e, slot) in numeric.iter_mut().enumerate() {
                let at = |delta: f64| -> Result<f64> {
                    let mut p = s.params.clone();
                    let (re, im) = p.get_mut(id).planes_mut();
                    let v = if plane == 0 { re } else { im };
                    v[e] += delta;
                    fd(&s.inputs, &p)
                };
                *slot = (at(STEP)? - at(-STEP)?) / (2.0 * STEP);
            }
            pairs.push((analytic, numeric));
        }
    }
    let global = pairs.iter().map(|(a, _)| max_abs(a)).fold(0.0, f64::max);
    let max_err = pairs.iter().map(|(a, n)| rel_err(a, n, SCALE_FLOOR * global)).fold(0.0, f64::max);
    let checked = pairs.iter().map(|(a, _)| a.len()).sum();
    Ok(GradReport { name: name.to_string(), max_rel_err: max_err, tolerance, checked, pass: max_err <= tolerance })
}

/// Every registered case with its default tolerance.
pub fn run_suite(seed: u64) -> Result<Vec<GradReport>> {
    registered().into_iter().map(|n| grad_check(n, seed, None)).collect()
}
