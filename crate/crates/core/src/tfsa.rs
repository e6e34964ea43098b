//! Complex time-frequency self-attention: separate attention along the time
//! and frequency axes, fused with the input by a 1x1 complex convolution.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cx::{fold_permutation, unfold_permutation, CxVar};
use crate::error::{shape_err, Result};
use crate::layers::CxConv;
use crate::params::{Binder, Mode, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Time,
    Freq,
}

impl Axis {
    fn is_time(self) -> bool {
        self == Axis::Time
    }
}

/// Query, key and value projections of one attention branch.
#[derive(Clone, Debug)]
pub struct TfsaBranch {
    pub q: CxConv,
    pub k: CxConv,
    pub v: CxConv,
}

impl TfsaBranch {
    fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, name: &str, c: usize, rng: &mut R) -> Result<Self> {
        let mut proj = |p: &str| CxConv::new(params, &format!("{name}.{p}"), c, c, (1, 1), (1, 1), (0, 0), false, false, rng);
        Ok(Self { q: proj("wq")?, k: proj("wk")?, v: proj("wv")? })
    }

    /// Self-attention along `axis`. Returns the output, shaped like `u`, and
    /// the real attention map `(B, L, L)`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        b: &mut Binder<T>,
        u: CxVar,
        axis: Axis,
        scaled: bool,
    ) -> Result<(CxVar, Var)> {
        let d = tape.cx_dims(u);
        if d.len() != 4 {
            return Err(shape_err!("attention expects (B,C,T,F), got {d:?}"));
        }
        let (bsz, c, t, f) = (d[0], d[1], d[2], d[3]);
        let (l, other) = if axis.is_time() { (t, f) } else { (f, t) };
        let fold = |tape: &mut Tape<T>, x: CxVar| -> Result<CxVar> {
            let p = tape.cx_permute(x, &fold_permutation(axis.is_time()))?;
            tape.cx_reshape(p, &[bsz, l, c * other])
        };
        let q = self.q.forward(tape, b, u)?;
        let q = fold(tape, q)?;
        let k = self.k.forward(tape, b, u)?;
        let k = fold(tape, k)?;
        let v = self.v.forward(tape, b, u)?;
        let v = fold(tape, v)?;
        let s = tape.cx_matmul(q, k, true)?;
        let mut logits = tape.cx_magnitude(s)?;
        if scaled {
            logits = tape.scale(logits, T::lit(1.0 / ((c * other) as f64).sqrt()));
        }
        let a = tape.softmax(logits);
        let out = tape.real_cx_matmul(a, v)?;
        let out = tape.cx_reshape(out, &[bsz, l, c, other])?;
        let out = tape.cx_permute(out, &unfold_permutation(axis.is_time()))?;
        Ok((out, a))
    }
}

/// Time-frequency self-attention module.
#[derive(Clone, Debug)]
pub struct Tfsa {
    pub time: TfsaBranch,
    pub freq: TfsaBranch,
    /// Fusion kernel mapping `3C -> C` channels.
    pub out: CxConv,
    pub channels: usize,
    /// Divide the attention logits by the square root of the feature size.
    pub scaled: bool,
}

impl Tfsa {
    /// Standard deviation of the noise added to the identity-selecting fusion
    /// kernel at initialization.
    pub const FUSION_INIT_STD: f64 = 0.01;

    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        channels: usize,
        scaled: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let time = TfsaBranch::new(params, &format!("{name}.time"), channels, rng)?;
        let freq = TfsaBranch::new(params, &format!("{name}.freq"), channels, rng)?;
        let out = CxConv::new(params, &format!("{name}.wo"), 3 * channels, channels, (1, 1), (1, 1), (0, 0), false, false, rng)?;
        let noise = Normal::new(0.0, Self::FUSION_INIT_STD).unwrap();
        let n = 3 * channels * channels;
        let mut re: Vec<T> = (0..n).map(|_| T::lit(noise.sample(rng))).collect();
        let im: Vec<T> = (0..n).map(|_| T::lit(noise.sample(rng))).collect();
        for c in 0..channels {
            re[c * 3 * channels + c] += T::one();
        }
        params.set(out.weight, CxTensor::from_vecs([channels, 3 * channels, 1, 1], re, im)?);
        Ok(Self { time, freq, out, channels, scaled })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, u: CxVar) -> Result<CxVar> {
        let (st, _) = self.time.forward(tape, b, u, Axis::Time, self.scaled)?;
        let (sf, _) = self.freq.forward(tape, b, u, Axis::Freq, self.scaled)?;
        let uc = tape.cx_concat(&[u, st, sf], 1)?;
        self.out.forward(tape, b, uc)
    }

    pub fn param_count(&self) -> usize {
        [&self.time, &self.freq].iter().map(|br| br.q.param_count() + br.k.param_count() + br.v.param_count()).sum::<usize>()
            + self.out.param_count()
    }

    /// Value-level single-axis attention: output and attention map.
    pub fn sa_axis<T: Scalar>(&self, params: &ParamSet<T>, u: &CxTensor<T>, axis: Axis) -> Result<(CxTensor<T>, Tensor<T>)> {
        let mut tape = Tape::new();
        let mut b = Binder::new(params, false, Mode::Eval);
        let uv = tape.cx_constant(u);
        let branch = if axis.is_time() { &self.time } else { &self.freq };
        let (out, a) = branch.forward(&mut tape, &mut b, uv, axis, self.scaled)?;
        Ok((tape.cx_value(out), tape.value(a).clone()))
    }

    /// Value-level module output.
    pub fn apply<T: Scalar>(&self, params: &ParamSet<T>, u: &CxTensor<T>) -> Result<CxTensor<T>> {
        let mut tape = Tape::new();
        let mut b = Binder::new(params, false, Mode::Eval);
        let uv = tape.cx_constant(u);
        let out = self.forward(&mut tape, &mut b, uv)?;
        Ok(tape.cx_value(out))
    }
}
