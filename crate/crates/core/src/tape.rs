//! Reverse-mode differentiation over real-plane primitives.
//!
//! Complex quantities live on the tape as pairs of real nodes (see
//! [`CxVar`](crate::CxVar)); a complex parameter is differentiated as two
//! independent real parameters.

use crate::error::{shape_err, Error, Result};
use crate::kernels::{self, ConvSpec};
use crate::tensor::{inverse_permutation, Shape, Tensor};
use crate::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, T),
    AddConst(Var),
    Abs(Var),
    Hypot(Var, Var),
    Sigmoid(Var),
    LeakyRelu(Var, T),
    SumAll(Var),
    MeanAll(Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Conv2d { x: Var, w: Var, spec: ConvSpec },
    ConvT2d { x: Var, w: Var, spec: ConvSpec },
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Slice { x: Var, axis: usize, start: usize },
    Softmax(Var),
    BatchNorm { x: Var, inv_std: Vec<T> },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddConst(..) => "add_const",
            Op::Abs(..) => "abs",
            Op::Hypot(..) => "hypot",
            Op::Sigmoid(..) => "sigmoid",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::SumAll(..) => "sum",
            Op::MeanAll(..) => "mean",
            Op::MatMul { .. } => "matmul",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvT2d { .. } => "conv_transpose2d",
            Op::Reshape(..) => "reshape",
            Op::Permute(..) => "permute",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Softmax(..) => "softmax",
            Op::BatchNorm { .. } => "batch_norm",
        }
    }
}

/// Names of every primitive with a backward rule.
pub const PRIMITIVES: &[&str] = &[
    "leaf",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "scale",
    "add_const",
    "abs",
    "hypot",
    "sigmoid",
    "leaky_relu",
    "sum",
    "mean",
    "matmul",
    "conv2d",
    "conv_transpose2d",
    "reshape",
    "permute",
    "concat",
    "slice",
    "softmax",
    "batch_norm",
];

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Per-channel statistics produced by [`Tape::batch_norm`].
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Append-only record of primitive operations. Node ids are topologically
/// ordered by construction.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { op, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Copy of `v`'s value as a new constant (gradient stops here).
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::broadcast_binary(self.value(a), self.value(b), |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::broadcast_binary(self.value(a), self.value(b), |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::broadcast_binary(self.value(a), self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v, &[a, b]))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::broadcast_binary(self.value(a), self.value(b), |x, y| x / y)?;
        Ok(self.push(Op::Div(a, b), v, &[a, b]))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| -x);
        self.push(Op::Neg(a), v, &[a])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), v, &[a])
    }

    pub fn add_const(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddConst(a), v, &[a])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.abs());
        self.push(Op::Abs(a), v, &[a])
    }

    /// Elementwise `sqrt(a^2 + b^2)`; the gradient at the origin is taken as 0.
    pub fn hypot(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::broadcast_binary(self.value(a), self.value(b), |x, y| x.hypot(y))?;
        Ok(self.push(Op::Hypot(a, b), v, &[a, b]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v, &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), v, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Tensor::scalar(x.sum() / T::from_usize(x.numel()).unwrap());
        self.push(Op::MeanAll(a), v, &[a])
    }

    /// Batched matmul of rank-3 nodes with optional transposition.
    pub fn matmul(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let v = kernels::batched_matmul(self.value(a), self.value(b), ta, tb)?;
        Ok(self.push(Op::MatMul { a, b, ta, tb }, v, &[a, b]))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, spec: ConvSpec) -> Result<Var> {
        let v = kernels::conv2d(self.value(x), self.value(w), spec)?;
        Ok(self.push(Op::Conv2d { x, w, spec }, v, &[x, w]))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, spec: ConvSpec, out_hw: (usize, usize)) -> Result<Var> {
        let v = kernels::conv_transpose2d(self.value(x), self.value(w), spec, out_hw)?;
        Ok(self.push(Op::ConvT2d { x, w, spec }, v, &[x, w]))
    }

    pub fn reshape(&mut self, a: Var, dims: impl Into<Vec<usize>>) -> Result<Var> {
        let v = self.value(a).reshape(dims)?;
        Ok(self.push(Op::Reshape(a), v, &[a]))
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let v = self.value(a).permute(axes)?;
        Ok(self.push(Op::Permute(a, axes.to_vec()), v, &[a]))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = kernels::concat(&values, axis)?;
        Ok(self.push(Op::Concat(parts.to_vec(), axis), v, parts))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let v = kernels::slice(self.value(x), axis, start, len)?;
        Ok(self.push(Op::Slice { x, axis, start }, v, &[x]))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = kernels::softmax_last(self.value(a));
        self.push(Op::Softmax(a), v, &[a])
    }

    /// Per-channel standardization over every axis except axis 1 (biased
    /// variance). Returns the normalized node and the batch statistics.
    pub fn batch_norm(&mut self, x: Var, eps: T) -> Result<(Var, BatchStats<T>)> {
        let xv = self.value(x);
        let d = xv.dims();
        if d.len() < 2 {
            return Err(shape_err!("batch_norm needs rank >= 2, got {d:?}"));
        }
        let (b, c) = (d[0], d[1]);
        let inner: usize = d[2..].iter().product();
        let count = T::from_usize(b * inner).unwrap();
        let data = xv.data();
        let mut out = vec![T::zero(); data.len()];
        let (mut means, mut vars, mut inv) = (vec![T::zero(); c], vec![T::zero(); c], vec![T::zero(); c]);
        for ch in 0..c {
            let block = |bi: usize| &data[(bi * c + ch) * inner..(bi * c + ch + 1) * inner];
            let mean = (0..b).map(|bi| block(bi).iter().copied().sum::<T>()).sum::<T>() / count;
            let var = (0..b)
                .map(|bi| block(bi).iter().map(|&v| (v - mean) * (v - mean)).sum::<T>())
                .sum::<T>()
                / count;
            let is = T::one() / (var + eps).sqrt();
            for bi in 0..b {
                let off = (bi * c + ch) * inner;
                for (o, &v) in out[off..off + inner].iter_mut().zip(block(bi)) {
                    *o = (v - mean) * is;
                }
            }
            means[ch] = mean;
            vars[ch] = var;
            inv[ch] = is;
        }
        let value = Tensor::from_parts(xv.shape().clone(), out);
        let var = self.push(Op::BatchNorm { x, inv_std: inv }, value, &[x]);
        Ok((var, BatchStats { mean: means, var: vars }))
    }

    /// Reverse sweep from a scalar real node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Argument(format!(
                "loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::from_parts(self.value(loss).shape().clone(), vec![T::one()]));
        let mut leaf_grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if let Op::Leaf = node.op {
                leaf_grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }
        Ok(Gradients { grads: leaf_grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let target = self.nodes[v.0].value.shape();
        let g = if g.shape() != target { kernels::reduce_to_shape(&g, target) } else { g };
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += *b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, id: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if rg(*b) {
                    self.accumulate(grads, *b, g.map(|x| -x));
                }
            }
            Op::Mul(a, b) => {
                if rg(*a) {
                    let ga = kernels::reduce_product(g, val(*a).shape(), val(*b), |g, y| g * y);
                    self.accumulate(grads, *a, ga);
                }
                if rg(*b) {
                    let gb = kernels::reduce_product(g, val(*b).shape(), val(*a), |g, x| g * x);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Div(a, b) => {
                if rg(*a) {
                    let ga = kernels::reduce_product(g, val(*a).shape(), val(*b), |g, y| g / y);
                    self.accumulate(grads, *a, ga);
                }
                if rg(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let q = kernels::broadcast_binary(g, out, |g, q| -g * q).unwrap();
                    let gb = kernels::reduce_product(&q, val(*b).shape(), val(*b), |g, y| g / y);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Neg(a) => self.accumulate(grads, *a, g.map(|x| -x)),
            Op::Scale(a, c) => {
                let c = *c;
                self.accumulate(grads, *a, g.map(|x| x * c));
            }
            Op::AddConst(a) | Op::Reshape(a) => {
                let gv = if matches!(node.op, Op::Reshape(_)) {
                    g.reshape(val(*a).dims().to_vec()).unwrap()
                } else {
                    g.clone()
                };
                self.accumulate(grads, *a, gv);
            }
            Op::Abs(a) => {
                let ga = zip(g, val(*a), |g, x| if x > T::zero() { g } else if x < T::zero() { -g } else { T::zero() });
                self.accumulate(grads, *a, ga);
            }
            Op::Hypot(a, b) => {
                let safe = |g: T, x: T, h: T| if h > T::zero() { g * x / h } else { T::zero() };
                for &(v, other) in &[(*a, *b), (*b, *a)] {
                    if !rg(v) {
                        continue;
                    }
                    let _ = other;
                    let xb = kernels::broadcast_binary(val(v), out, |x, _| x).unwrap();
                    let gh = zip3(g, &xb, out, safe);
                    self.accumulate(grads, v, gh);
                }
            }
            Op::Sigmoid(a) => {
                let ga = zip(g, out, |g, y| g * y * (T::one() - y));
                self.accumulate(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                let ga = zip(g, val(*a), |g, x| if x > T::zero() { g } else { g * s });
                self.accumulate(grads, *a, ga);
            }
            Op::SumAll(a) => {
                let x = val(*a);
                let ga = Tensor::from_parts(x.shape().clone(), vec![g.item(); x.numel()]);
                self.accumulate(grads, *a, ga);
            }
            Op::MeanAll(a) => {
                let x = val(*a);
                let s = g.item() / T::from_usize(x.numel()).unwrap();
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().clone(), vec![s; x.numel()]));
            }
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (val(*a), val(*b));
                if rg(*a) {
                    // C = op(A) op(B): dA = g op(B)^T, transposed back if A was
                    let ga = if *ta {
                        kernels::batched_matmul(bv, g, *tb, true).unwrap()
                    } else {
                        kernels::batched_matmul(g, bv, false, !*tb).unwrap()
                    };
                    self.accumulate(grads, *a, ga);
                }
                if rg(*b) {
                    let gb = if *tb {
                        kernels::batched_matmul(g, av, true, *ta).unwrap()
                    } else {
                        kernels::batched_matmul(av, g, !*ta, false).unwrap()
                    };
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Conv2d { x, w, spec } => {
                let (dx, dw) = kernels::conv2d_backward(val(*x), val(*w), g, *spec, rg(*x), rg(*w));
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::ConvT2d { x, w, spec } => {
                let (dx, dw) = kernels::conv_transpose2d_backward(val(*x), val(*w), g, *spec, rg(*x), rg(*w));
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::Permute(a, axes) => {
                let ga = g.permute(&inverse_permutation(axes)).unwrap();
                self.accumulate(grads, *a, ga);
            }
            Op::Concat(parts, axis) => {
                let mut start = 0;
                for &p in parts {
                    let len = val(p).dims()[*axis];
                    if rg(p) {
                        self.accumulate(grads, p, kernels::slice(g, *axis, start, len).unwrap());
                    }
                    start += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let gx = kernels::unslice(g, val(*x).shape(), *axis, *start);
                self.accumulate(grads, *x, gx);
            }
            Op::Softmax(a) => {
                let n = *out.dims().last().unwrap();
                let mut ga = vec![T::zero(); out.numel()];
                for ((gr, yr), dr) in g.data().chunks(n).zip(out.data().chunks(n)).zip(ga.chunks_mut(n)) {
                    let dot: T = gr.iter().zip(yr).map(|(&g, &y)| g * y).sum();
                    for ((d, &g), &y) in dr.iter_mut().zip(gr).zip(yr) {
                        *d = y * (g - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(out.shape().clone(), ga));
            }
            Op::BatchNorm { x, inv_std } => {
                let d = out.dims();
                let (b, c) = (d[0], d[1]);
                let inner: usize = d[2..].iter().product();
                let n = T::from_usize(b * inner).unwrap();
                let (gd, yd) = (g.data(), out.data());
                let mut gx = vec![T::zero(); gd.len()];
                for ch in 0..c {
                    let mut sg = T::zero();
                    let mut sgy = T::zero();
                    for bi in 0..b {
                        let off = (bi * c + ch) * inner;
                        for i in off..off + inner {
                            sg += gd[i];
                            sgy += gd[i] * yd[i];
                        }
                    }
                    let k = inv_std[ch] / n;
                    for bi in 0..b {
                        let off = (bi * c + ch) * inner;
                        for i in off..off + inner {
                            gx[i] = k * (n * gd[i] - sg - yd[i] * sgy);
                        }
                    }
                }
                self.accumulate(grads, *x, Tensor::from_parts(out.shape().clone(), gx));
            }
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn zip<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().clone(), data)
}

fn zip3<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, c: &Tensor<T>, f: impl Fn(T, T, T) -> T) -> Tensor<T> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .map(|((&x, &y), &z)| f(x, y, z))
        .collect();
    Tensor::from_parts(a.shape().clone(), data)
}

/// Gradients of leaf nodes from one backward sweep.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient w.r.t. a leaf; `None` when the leaf does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient w.r.t. a leaf, zeros when it does not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: &Shape) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::from_parts(shape.clone(), vec![T::zero(); shape.numel()]))
    }
}
