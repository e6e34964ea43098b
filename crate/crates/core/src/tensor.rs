//! Dense real and complex tensors in row-major layout.
//!
//! Rank-4 tensors follow the (batch, channel, time, frequency) order. A
//! complex tensor is a pair of real planes with a common shape.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Error, Result};
use crate::kernels;
use crate::Scalar;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(shape_err!("rank-0 shapes are not supported"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(shape_err!("zero-sized dimension in {dims:?}"));
        }
        Ok(Self(dims))
    }

    pub fn scalar() -> Self {
        Self(vec![1])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.0[i + 1];
        }
        s
    }

    /// Broadcast result of two shapes of equal rank: each dimension pair must
    /// be equal or contain a 1.
    pub fn broadcast(a: &Shape, b: &Shape) -> Result<Shape> {
        if a.rank() != b.rank() {
            return Err(shape_err!("rank mismatch {a:?} vs {b:?} (no implicit rank promotion)"));
        }
        let dims = a
            .0
            .iter()
            .zip(&b.0)
            .map(|(&x, &y)| match (x, y) {
                _ if x == y => Ok(x),
                (1, y) => Ok(y),
                (x, 1) => Ok(x),
                _ => Err(shape_err!("cannot broadcast {a:?} with {b:?}")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Shape(dims))
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&Shape> for Vec<usize> {
    fn from(s: &Shape) -> Self {
        s.0.clone()
    }
}

/// Real tensor. Storage is reference counted so cloning is cheap; mutation
/// copies on write.
#[derive(Clone)]
pub struct Tensor<T> {
    shape: Shape,
    data: Arc<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(shape_err!(
                "shape {:?} needs {} elements, got {}",
                shape,
                shape.numel(),
                data.len()
            ));
        }
        Ok(Self { shape, data: Arc::new(data) })
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Self { shape, data: Arc::new(data) }
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(dims, T::zero())
    }

    pub fn full(dims: impl Into<Vec<usize>>, value: T) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let n = shape.numel();
        Ok(Self::from_parts(shape, vec![value; n]))
    }

    pub fn zeros_like(other: &Tensor<T>) -> Self {
        Self::from_parts(other.shape.clone(), vec![T::zero(); other.numel()])
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(Shape::scalar(), vec![value])
    }

    /// i.i.d. normal entries with the given standard deviation.
    pub fn randn<R: Rng + ?Sized>(dims: impl Into<Vec<usize>>, std: f64, rng: &mut R) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = (0..shape.numel())
            .map(|_| T::lit(std * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Ok(Self::from_parts(shape, data))
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn into_vec(self) -> Vec<T> {
        Arc::try_unwrap(self.data).unwrap_or_else(|a| (*a).clone())
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    pub fn at(&self, index: &[usize]) -> T {
        let off: usize = index.iter().zip(self.shape.strides()).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().map(|x| U::from_f64(x.to_f64().unwrap()).unwrap()).collect(),
        )
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.numel() {
            return Err(shape_err!("cannot reshape {:?} into {:?}", self.shape, shape));
        }
        Ok(Self { shape, data: Arc::clone(&self.data) })
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        check_permutation(axes, self.shape.rank())?;
        let (shape, data) = kernels::permute(&self.shape, &self.data, axes);
        Ok(Self::from_parts(shape, data))
    }

    pub fn ptr_eq(&self, other: &Tensor<T>) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
    }

    /// Bitwise equality of shape and contents.
    pub fn bit_eq(&self, other: &Tensor<T>) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.to_f64().unwrap().to_bits() == b.to_f64().unwrap().to_bits())
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<_> = self.data.iter().take(8).collect();
        write!(f, "Tensor{:?} {:?}", self.shape, head)?;
        if self.data.len() > 8 {
            write!(f, "..")?;
        }
        Ok(())
    }
}

pub(crate) fn check_permutation(axes: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if axes.len() != rank {
        return Err(Error::Argument(format!("permutation {axes:?} has wrong length for rank {rank}")));
    }
    for &a in axes {
        if a >= rank || seen[a] {
            return Err(Error::Argument(format!("{axes:?} is not a permutation of 0..{rank}")));
        }
        seen[a] = true;
    }
    Ok(())
}

pub fn inverse_permutation(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

/// Complex tensor held as two real planes of identical shape.
#[derive(Clone, Debug)]
pub struct CxTensor<T> {
    re: Tensor<T>,
    im: Tensor<T>,
    real_valued: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CxBinary {
    Add,
    Sub,
    Mul,
}

impl<T: Scalar> CxTensor<T> {
    pub fn new(re: Tensor<T>, im: Tensor<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(shape_err!("re {:?} and im {:?} planes differ", re.shape(), im.shape()));
        }
        Ok(Self { re, im, real_valued: false })
    }

    /// Complex tensor with an identically-zero imaginary plane.
    pub fn from_real(re: Tensor<T>) -> Self {
        let im = Tensor::zeros_like(&re);
        Self { re, im, real_valued: true }
    }

    pub fn from_vecs(dims: impl Into<Vec<usize>>, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        let dims = dims.into();
        Self::new(Tensor::from_vec(dims.clone(), re)?, Tensor::from_vec(dims, im)?)
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let re = Tensor::zeros(dims)?;
        Ok(Self { im: re.clone(), re, real_valued: false })
    }

    pub fn randn<R: Rng + ?Sized>(dims: impl Into<Vec<usize>>, std: f64, rng: &mut R) -> Result<Self> {
        let dims = dims.into();
        let re = Tensor::randn(dims.clone(), std, rng)?;
        let im = Tensor::randn(dims, std, rng)?;
        Ok(Self { re, im, real_valued: false })
    }

    pub fn re(&self) -> &Tensor<T> {
        &self.re
    }

    pub fn im(&self) -> &Tensor<T> {
        &self.im
    }

    pub fn into_planes(self) -> (Tensor<T>, Tensor<T>) {
        (self.re, self.im)
    }

    pub fn planes_mut(&mut self) -> (&mut [T], &mut [T]) {
        self.real_valued = false;
        (self.re.data_mut(), self.im.data_mut())
    }

    pub fn shape(&self) -> &Shape {
        self.re.shape()
    }

    pub fn dims(&self) -> &[usize] {
        self.re.dims()
    }

    pub fn numel(&self) -> usize {
        self.re.numel()
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn at(&self, index: &[usize]) -> (T, T) {
        (self.re.at(index), self.im.at(index))
    }

    pub fn cast<U: Scalar>(&self) -> CxTensor<U> {
        CxTensor { re: self.re.cast(), im: self.im.cast(), real_valued: self.real_valued }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn bit_eq(&self, other: &CxTensor<T>) -> bool {
        self.re.bit_eq(&other.re) && self.im.bit_eq(&other.im)
    }

    /// Elementwise complex add/sub/mul with size-1 broadcasting.
    pub fn elementwise(&self, other: &CxTensor<T>, kind: CxBinary) -> Result<Self> {
        let (a, b) = (self, other);
        let (re, im) = match kind {
            CxBinary::Add => (
                kernels::broadcast_binary(&a.re, &b.re, |x, y| x + y)?,
                kernels::broadcast_binary(&a.im, &b.im, |x, y| x + y)?,
            ),
            CxBinary::Sub => (
                kernels::broadcast_binary(&a.re, &b.re, |x, y| x - y)?,
                kernels::broadcast_binary(&a.im, &b.im, |x, y| x - y)?,
            ),
            CxBinary::Mul => {
                let rr = kernels::broadcast_binary(&a.re, &b.re, |x, y| x * y)?;
                let ii = kernels::broadcast_binary(&a.im, &b.im, |x, y| x * y)?;
                let ri = kernels::broadcast_binary(&a.re, &b.im, |x, y| x * y)?;
                let ir = kernels::broadcast_binary(&a.im, &b.re, |x, y| x * y)?;
                (
                    kernels::broadcast_binary(&rr, &ii, |x, y| x - y)?,
                    kernels::broadcast_binary(&ri, &ir, |x, y| x + y)?,
                )
            }
        };
        let real_valued = a.real_valued && b.real_valued;
        Ok(Self { re, im, real_valued })
    }

    /// Batched complex product `(B,M,K) x (B,K,N)`; with `conj_b` the second
    /// operand is `(B,N,K)` and enters conjugate-transposed.
    pub fn matmul(&self, other: &CxTensor<T>, conj_b: bool) -> Result<Self> {
        let (ar, ai, br, bi) = (&self.re, &self.im, &other.re, &other.im);
        let mm = |x: &Tensor<T>, y: &Tensor<T>| kernels::batched_matmul(x, y, false, conj_b);
        let (rr, ii, ri, ir) = (mm(ar, br)?, mm(ai, bi)?, mm(ar, bi)?, mm(ai, br)?);
        // conj(b) flips the sign of b's imaginary plane
        let (re, im) = if conj_b {
            (
                kernels::broadcast_binary(&rr, &ii, |x, y| x + y)?,
                kernels::broadcast_binary(&ir, &ri, |x, y| x - y)?,
            )
        } else {
            (
                kernels::broadcast_binary(&rr, &ii, |x, y| x - y)?,
                kernels::broadcast_binary(&ri, &ir, |x, y| x + y)?,
            )
        };
        Ok(Self { re, im, real_valued: false })
    }

    /// Elementwise modulus as a real-valued complex tensor.
    pub fn magnitude(&self) -> Self {
        let data = self
            .re
            .data()
            .iter()
            .zip(self.im.data())
            .map(|(&r, &i)| r.hypot(i))
            .collect();
        Self::from_real(Tensor::from_parts(self.shape().clone(), data))
    }

    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        Ok(Self {
            re: self.re.reshape(dims.clone())?,
            im: self.im.reshape(dims)?,
            real_valued: self.real_valued,
        })
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        Ok(Self { re: self.re.permute(axes)?, im: self.im.permute(axes)?, real_valued: self.real_valued })
    }
}
