//! Spectral normalization of complex kernels through their real-block
//! embedding `[[Re, -Im], [Im, Re]]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cx::CxVar;
use crate::error::{Error, Result};
use crate::layers::conv::CxConvParams;
use crate::params::{ParamId, ParamSet};
use crate::tape::Tape;
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

/// Real-block embedding of a kernel viewed as a `(C_out, C_in*k_t*k_f)`
/// complex matrix. Returns `(rows, cols, row-major data)`.
pub fn embed_real_block<T: Scalar>(w: &CxTensor<T>) -> (usize, usize, Vec<T>) {
    let rows = w.dims()[0];
    let cols = w.numel() / rows;
    let (re, im) = (w.re().data(), w.im().data());
    let mut e = vec![T::zero(); 4 * rows * cols];
    let stride = 2 * cols;
    for r in 0..rows {
        for c in 0..cols {
            let (a, b) = (re[r * cols + c], im[r * cols + c]);
            e[r * stride + c] = a;
            e[r * stride + cols + c] = -b;
            e[(rows + r) * stride + c] = b;
            e[(rows + r) * stride + cols + c] = a;
        }
    }
    (2 * rows, 2 * cols, e)
}

fn normalize<T: Scalar>(x: &mut [T]) -> Option<T> {
    let n = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= n);
    Some(n)
}

/// Runs `iters` power iterations on the embedded kernel, updating `u`
/// (length `2*C_out`) and `v` (length `2*C_in*k_t*k_f`). Returns the
/// estimate `u^T E v`.
pub fn power_iteration<T: Scalar>(w: &CxTensor<T>, u: &mut [T], v: &mut [T], iters: usize) -> Result<T> {
    let (rows, cols, e) = embed_real_block(w);
    if u.len() != rows || v.len() != cols {
        return Err(Error::Argument(format!(
            "power-iteration vectors have lengths {}/{}, expected {rows}/{cols}",
            u.len(),
            v.len()
        )));
    }
    let degenerate = || Error::DegenerateWeight("kernel is zero; spectral norm undefined".into());
    if e.iter().all(|&x| x == T::zero()) {
        return Err(degenerate());
    }
    for _ in 0..iters {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = (0..rows).map(|i| e[i * cols + j] * u[i]).sum();
        }
        normalize(v).ok_or_else(degenerate)?;
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = e[i * cols..(i + 1) * cols].iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
        }
        normalize(u).ok_or_else(degenerate)?;
    }
    Ok((0..rows)
        .map(|i| u[i] * e[i * cols..(i + 1) * cols].iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<T>())
        .sum())
}

/// Constant planes `G_r`, `G_i` with `u^T E v = sum(W_r G_r) + sum(W_i G_i)`.
fn sigma_coefficients<T: Scalar>(dims: &[usize], u: &[T], v: &[T]) -> (Tensor<T>, Tensor<T>) {
    let rows = dims[0];
    let cols: usize = dims[1..].iter().product();
    let (u1, u2) = u.split_at(rows);
    let (v1, v2) = v.split_at(cols);
    let mut gr = vec![T::zero(); rows * cols];
    let mut gi = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            gr[r * cols + c] = u1[r] * v1[c] + u2[r] * v2[c];
            gi[r * cols + c] = u2[r] * v1[c] - u1[r] * v2[c];
        }
    }
    (
        Tensor::from_vec(dims.to_vec(), gr).unwrap(),
        Tensor::from_vec(dims.to_vec(), gi).unwrap(),
    )
}

/// Divides both kernel planes by `sigma = u^T E(W) v`, differentiating
/// through `sigma` with `u`, `v` held fixed.
pub(crate) fn normalize_on_tape<T: Scalar>(tape: &mut Tape<T>, w: CxVar, u: &Tensor<T>, v: &Tensor<T>) -> Result<CxVar> {
    let dims = tape.cx_dims(w);
    let (gr, gi) = sigma_coefficients(&dims, u.data(), v.data());
    let (gr, gi) = (tape.constant(gr), tape.constant(gi));
    let pr = tape.mul(w.re, gr)?;
    let pi = tape.mul(w.im, gi)?;
    let (sr, si) = (tape.sum(pr), tape.sum(pi));
    let sigma = tape.add(sr, si)?;
    let sigma = tape.reshape(sigma, vec![1; dims.len()])?;
    Ok(CxVar { re: tape.div(w.re, sigma)?, im: tape.div(w.im, sigma)? })
}

/// Power-iteration vectors for one kernel, for value-level use.
#[derive(Clone, Debug)]
pub struct SpectralNormState<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> SpectralNormState<T> {
    pub fn random<R: Rng + ?Sized>(kernel_dims: &[usize], rng: &mut R) -> Self {
        let rows = 2 * kernel_dims[0];
        let cols = 2 * kernel_dims[1..].iter().product::<usize>();
        let mut draw = |n: usize| {
            let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.sample(StandardNormal))).collect();
            normalize(&mut x);
            x
        };
        Self { u: draw(rows), v: draw(cols) }
    }
}

/// Updates `state` with `iters` power iterations and returns the kernel with
/// both planes divided by the estimated top singular value, plus that value.
pub fn spectral_normalize<T: Scalar>(
    p: &CxConvParams<T>,
    state: &mut SpectralNormState<T>,
    iters: usize,
) -> Result<(CxTensor<T>, T)> {
    let sigma = power_iteration(&p.weight, &mut state.u, &mut state.v, iters)?;
    let (re, im) = (p.weight.re().map(|x| x / sigma), p.weight.im().map(|x| x / sigma));
    Ok((CxTensor::new(re, im)?, sigma))
}

/// Power-iteration buffers of a spectrally normalized layer.
#[derive(Clone, Debug)]
pub struct SpectralNorm {
    pub weight: ParamId,
    pub u: ParamId,
    pub v: ParamId,
}

impl SpectralNorm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        weight: ParamId,
        init_iters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let dims = params.get(weight).dims().to_vec();
        let mut st = SpectralNormState::<T>::random(&dims, rng);
        power_iteration(params.get(weight), &mut st.u, &mut st.v, init_iters)?;
        let as_buffer = |x: Vec<T>| CxTensor::from_real(Tensor::from_vec([x.len()], x).unwrap());
        let u = params.add_buffer(format!("{name}.sn_u"), as_buffer(st.u));
        let v = params.add_buffer(format!("{name}.sn_v"), as_buffer(st.v));
        Ok(Self { weight, u, v })
    }

    /// Advances the stored vectors by `iters` iterations against the current
    /// weight; returns the new estimate.
    pub fn step<T: Scalar>(&self, params: &mut ParamSet<T>, iters: usize) -> Result<T> {
        let mut u = params.get(self.u).re().data().to_vec();
        let mut v = params.get(self.v).re().data().to_vec();
        let sigma = power_iteration(params.get(self.weight), &mut u, &mut v, iters)?;
        params.set(self.u, CxTensor::from_real(Tensor::from_vec([u.len()], u)?));
        params.set(self.v, CxTensor::from_real(Tensor::from_vec([v.len()], v)?));
        Ok(sigma)
    }

    pub fn sigma<T: Scalar>(&self, params: &ParamSet<T>) -> T {
        let mut u = params.get(self.u).re().data().to_vec();
        let mut v = params.get(self.v).re().data().to_vec();
        power_iteration(params.get(self.weight), &mut u, &mut v, 0).unwrap_or(T::nan())
    }
}
