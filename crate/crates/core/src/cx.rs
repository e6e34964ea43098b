//! Complex-valued operations recorded on a [`Tape`] as pairs of real nodes.

use crate::error::Result;
use crate::kernels::ConvSpec;
use crate::tape::{Tape, Var};
use crate::tensor::{inverse_permutation, CxTensor};
use crate::Scalar;

/// A complex node: one real node per plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CxVar {
    pub re: Var,
    pub im: Var,
}

impl<T: Scalar> Tape<T> {
    pub fn cx_param(&mut self, x: &CxTensor<T>) -> CxVar {
        CxVar { re: self.param(x.re().clone()), im: self.param(x.im().clone()) }
    }

    pub fn cx_constant(&mut self, x: &CxTensor<T>) -> CxVar {
        CxVar { re: self.constant(x.re().clone()), im: self.constant(x.im().clone()) }
    }

    pub fn cx_value(&self, v: CxVar) -> CxTensor<T> {
        CxTensor::new(self.value(v.re).clone(), self.value(v.im).clone()).expect("planes share a shape")
    }

    pub fn cx_dims(&self, v: CxVar) -> Vec<usize> {
        self.value(v.re).dims().to_vec()
    }

    pub fn cx_detach(&mut self, v: CxVar) -> CxVar {
        CxVar { re: self.detach(v.re), im: self.detach(v.im) }
    }

    pub fn cx_add(&mut self, a: CxVar, b: CxVar) -> Result<CxVar> {
        Ok(CxVar { re: self.add(a.re, b.re)?, im: self.add(a.im, b.im)? })
    }

    pub fn cx_sub(&mut self, a: CxVar, b: CxVar) -> Result<CxVar> {
        Ok(CxVar { re: self.sub(a.re, b.re)?, im: self.sub(a.im, b.im)? })
    }

    /// `(a_r b_r - a_i b_i) + j(a_r b_i + a_i b_r)` with broadcasting.
    pub fn cx_mul(&mut self, a: CxVar, b: CxVar) -> Result<CxVar> {
        let rr = self.mul(a.re, b.re)?;
        let ii = self.mul(a.im, b.im)?;
        let ri = self.mul(a.re, b.im)?;
        let ir = self.mul(a.im, b.re)?;
        Ok(CxVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
    }

    /// Real node times complex node, elementwise.
    pub fn cx_mul_real(&mut self, a: CxVar, r: Var) -> Result<CxVar> {
        Ok(CxVar { re: self.mul(a.re, r)?, im: self.mul(a.im, r)? })
    }

    /// Batched complex matmul; `conj_b` takes `b` as `(B,N,K)` and applies
    /// its conjugate transpose.
    pub fn cx_matmul(&mut self, a: CxVar, b: CxVar, conj_b: bool) -> Result<CxVar> {
        let rr = self.matmul(a.re, b.re, false, conj_b)?;
        let ii = self.matmul(a.im, b.im, false, conj_b)?;
        let ri = self.matmul(a.re, b.im, false, conj_b)?;
        let ir = self.matmul(a.im, b.re, false, conj_b)?;
        if conj_b {
            Ok(CxVar { re: self.add(rr, ii)?, im: self.sub(ir, ri)? })
        } else {
            Ok(CxVar { re: self.sub(rr, ii)?, im: self.add(ri, ir)? })
        }
    }

    /// Real `(B,M,K)` matrix times complex `(B,K,N)`.
    pub fn real_cx_matmul(&mut self, a: Var, b: CxVar) -> Result<CxVar> {
        Ok(CxVar { re: self.matmul(a, b.re, false, false)?, im: self.matmul(a, b.im, false, false)? })
    }

    /// Elementwise modulus as a real node.
    pub fn cx_magnitude(&mut self, a: CxVar) -> Result<Var> {
        self.hypot(a.re, a.im)
    }

    pub fn cx_reshape(&mut self, a: CxVar, dims: &[usize]) -> Result<CxVar> {
        Ok(CxVar { re: self.reshape(a.re, dims.to_vec())?, im: self.reshape(a.im, dims.to_vec())? })
    }

    pub fn cx_permute(&mut self, a: CxVar, axes: &[usize]) -> Result<CxVar> {
        Ok(CxVar { re: self.permute(a.re, axes)?, im: self.permute(a.im, axes)? })
    }

    pub fn cx_concat(&mut self, parts: &[CxVar], axis: usize) -> Result<CxVar> {
        let re: Vec<Var> = parts.iter().map(|p| p.re).collect();
        let im: Vec<Var> = parts.iter().map(|p| p.im).collect();
        Ok(CxVar { re: self.concat(&re, axis)?, im: self.concat(&im, axis)? })
    }

    pub fn cx_slice(&mut self, a: CxVar, axis: usize, start: usize, len: usize) -> Result<CxVar> {
        Ok(CxVar { re: self.slice(a.re, axis, start, len)?, im: self.slice(a.im, axis, start, len)? })
    }

    pub fn cx_leaky_relu(&mut self, a: CxVar, slope: T) -> CxVar {
        CxVar { re: self.leaky_relu(a.re, slope), im: self.leaky_relu(a.im, slope) }
    }

    /// Complex 2-D convolution with the sign convention
    /// `Z = (W_r*U_r + W_i*U_i) + j(W_r*U_i - W_i*U_r)`.
    ///
    /// The four real correlations run as one real convolution over stacked
    /// planes with the block kernel `[[W_r, W_i], [-W_i, W_r]]`.
    /// `w` is `(C_out, C_in, k_t, k_f)`, `bias` is `(C_out)`.
    pub fn cx_conv2d(&mut self, x: CxVar, w: CxVar, bias: Option<CxVar>, spec: ConvSpec) -> Result<CxVar> {
        let cout = self.value(w.re).dims()[0];
        let stacked = self.concat(&[x.re, x.im], 1)?;
        let neg_wi = self.neg(w.im);
        let top = self.concat(&[w.re, w.im], 1)?;
        let bottom = self.concat(&[neg_wi, w.re], 1)?;
        let kernel = self.concat(&[top, bottom], 0)?;
        let z = self.conv2d(stacked, kernel, spec)?;
        let out = CxVar { re: self.slice(z, 1, 0, cout)?, im: self.slice(z, 1, cout, cout)? };
        self.add_channel_bias(out, bias)
    }

    /// Complex transposed convolution under the same sign convention as
    /// [`cx_conv2d`](Self::cx_conv2d), each real correlation replaced by its
    /// adjoint. `w` is `(C_in, C_out, k_t, k_f)`.
    pub fn cx_conv_transpose2d(
        &mut self,
        x: CxVar,
        w: CxVar,
        bias: Option<CxVar>,
        spec: ConvSpec,
        out_hw: (usize, usize),
    ) -> Result<CxVar> {
        let cout = self.value(w.re).dims()[1];
        let stacked = self.concat(&[x.re, x.im], 1)?;
        let neg_wi = self.neg(w.im);
        let from_re = self.concat(&[w.re, neg_wi], 1)?;
        let from_im = self.concat(&[w.im, w.re], 1)?;
        let kernel = self.concat(&[from_re, from_im], 0)?;
        let z = self.conv_transpose2d(stacked, kernel, spec, out_hw)?;
        let out = CxVar { re: self.slice(z, 1, 0, cout)?, im: self.slice(z, 1, cout, cout)? };
        self.add_channel_bias(out, bias)
    }

    fn add_channel_bias(&mut self, x: CxVar, bias: Option<CxVar>) -> Result<CxVar> {
        let Some(b) = bias else { return Ok(x) };
        let c = self.value(b.re).numel();
        let b = self.cx_reshape(b, &[1, c, 1, 1])?;
        self.cx_add(x, b)
    }
}

/// Value-level reshape of a complex tensor through its canonical axes,
/// `(B,C,T,F) -> (B,T,C*F)` for the time axis and `(B,F,C*T)` for frequency.
pub fn fold_axis<T: Scalar>(x: &CxTensor<T>, time_axis: bool) -> Result<CxTensor<T>> {
    let d = x.dims();
    let axes = fold_permutation(time_axis);
    let p = x.permute(&axes)?;
    let l = if time_axis { d[2] } else { d[3] };
    p.reshape([d[0], l, x.numel() / (d[0] * l)])
}

pub(crate) fn fold_permutation(time_axis: bool) -> [usize; 4] {
    if time_axis {
        [0, 2, 1, 3]
    } else {
        [0, 3, 1, 2]
    }
}

pub(crate) fn unfold_permutation(time_axis: bool) -> Vec<usize> {
    inverse_permutation(&fold_permutation(time_axis))
}

/// Scalar loss helpers that never touch the tape.
pub fn cx_sum_abs2<T: Scalar>(x: &CxTensor<T>) -> T {
    x.re().data().iter().zip(x.im().data()).map(|(&r, &i)| r * r + i * i).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CxBinary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_abs2_on_four_elements() {
        let z = CxTensor::from_vecs([4], vec![1.0, -2.0, 0.5, 3.0], vec![4.0, 0.0, 1.0, -1.0]).unwrap();
        let mut tape = Tape::new();
        let v = tape.cx_param(&z);
        let m = tape.cx_magnitude(v).unwrap();
        let m2 = tape.mul(m, m).unwrap();
        let s = tape.sum(m2);
        let oracle: f64 = [1.0, -2.0, 0.5, 3.0f64]
            .iter()
            .zip([4.0, 0.0, 1.0, -1.0f64])
            .map(|(r, i)| r * r + i * i)
            .sum();
        assert!((tape.value(s).item() - oracle).abs() < 1e-12);
        assert!((cx_sum_abs2(&z) - oracle).abs() < 1e-12);
    }

    #[test]
    fn tape_mul_matches_value_mul() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CxTensor::<f64>::randn([2, 3], 1.0, &mut rng).unwrap();
        let b = CxTensor::<f64>::randn([1, 3], 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let (va, vb) = (tape.cx_constant(&a), tape.cx_constant(&b));
        let p = tape.cx_mul(va, vb).unwrap();
        let expect = a.elementwise(&b, CxBinary::Mul).unwrap();
        assert!(tape.cx_value(p).bit_eq(&expect));
    }

    #[test]
    fn conj_matmul_matches_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = CxTensor::<f64>::randn([2, 3, 4], 1.0, &mut rng).unwrap();
        let b = CxTensor::<f64>::randn([2, 5, 4], 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let (va, vb) = (tape.cx_constant(&a), tape.cx_constant(&b));
        let p = tape.cx_matmul(va, vb, true).unwrap();
        let expect = a.matmul(&b, true).unwrap();
        assert!(tape.cx_value(p).bit_eq(&expect));
        // entry check against the definition sum_k a_ik conj(b_jk)
        let (mut sr, mut si) = (0.0, 0.0);
        for k in 0..4 {
            let (ar, ai) = a.at(&[1, 2, k]);
            let (br, bi) = b.at(&[1, 3, k]);
            sr += ar * br + ai * bi;
            si += ai * br - ar * bi;
        }
        let (pr, pi) = expect.at(&[1, 2, 3]);
        assert!((pr - sr).abs() < 1e-12 && (pi - si).abs() < 1e-12);
    }

    #[test]
    fn fold_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = CxTensor::<f64>::randn([2, 3, 4, 5], 1.0, &mut rng).unwrap();
        for time in [true, false] {
            let f = fold_axis(&x, time).unwrap();
            let l = if time { 4 } else { 5 };
            assert_eq!(f.dims(), &[2, l, 60 / l]);
            let p = fold_permutation(time);
            let unf = f
                .reshape([2, l, 3, 60 / (3 * l)])
                .unwrap()
                .permute(&unfold_permutation(time))
                .unwrap();
            assert!(unf.bit_eq(&x));
            let _ = p;
        }
    }
}
