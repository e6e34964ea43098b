use crate::cx::CxVar;
use crate::error::{shape_err, Error, Result};
use crate::params::{Binder, ParamId, ParamSet};
use crate::tape::{BatchStats, Tape};
use crate::tensor::{CxTensor, Tensor};
use crate::Scalar;

/// Complex batch-normalization variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BatchNormKind {
    /// Real and imaginary planes standardized independently per channel.
    #[default]
    Split,
    /// 2x2 covariance whitening. Reserved; not implemented.
    Whitening,
}

/// Split complex batch normalization with complex affine `gamma * x + beta`.
///
/// Running statistics live in buffers whose real part tracks the real plane
/// and imaginary part tracks the imaginary plane.
#[derive(Clone, Debug)]
pub struct CxBatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
    pub momentum: f64,
    pub eps: f64,
}

impl CxBatchNorm {
    pub const MOMENTUM: f64 = 0.1;
    pub const EPS: f64 = 1e-5;

    pub fn new<T: Scalar>(params: &mut ParamSet<T>, name: &str, channels: usize, kind: BatchNormKind) -> Result<Self> {
        if kind == BatchNormKind::Whitening {
            return Err(Error::Config("whitening batch normalization is not implemented".into()));
        }
        if channels == 0 {
            return Err(Error::Config(format!("{name}: batch norm needs at least one channel")));
        }
        let ones = Tensor::full([channels], T::one())?;
        let zeros = Tensor::zeros([channels])?;
        let gamma = params.add(format!("{name}.gamma"), CxTensor::from_real(ones.clone()));
        let beta = params.add(format!("{name}.beta"), CxTensor::from_real(zeros.clone()));
        let running_mean = params.add_buffer(format!("{name}.running_mean"), CxTensor::from_real(zeros.clone()));
        let running_var = params.add_buffer(format!("{name}.running_var"), CxTensor::new(ones.clone(), ones)?);
        Ok(Self { gamma, beta, running_mean, running_var, channels, momentum: Self::MOMENTUM, eps: Self::EPS })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, x: CxVar) -> Result<CxVar> {
        let d = tape.cx_dims(x);
        if d.len() < 2 || d[1] != self.channels {
            return Err(shape_err!("batch norm over {} channels got {d:?}", self.channels));
        }
        let normalized = if b.mode.uses_batch_stats() {
            if b.mode == crate::params::Mode::Train && d[0] < 2 {
                return Err(Error::Argument("batch norm in training mode needs a batch of at least 2".into()));
            }
            let eps = T::lit(self.eps);
            let (re, sr) = tape.batch_norm(x.re, eps)?;
            let (im, si) = tape.batch_norm(x.im, eps)?;
            let count = d.iter().product::<usize>() / d[1];
            self.queue_running_update(b, &sr, &si, count)?;
            CxVar { re, im }
        } else {
            self.normalize_with_running(tape, b, x, d.len())?
        };
        let mut shape = vec![1; d.len()];
        shape[1] = self.channels;
        let gamma = b.var(tape, self.gamma);
        let gamma = tape.cx_reshape(gamma, &shape)?;
        let beta = b.var(tape, self.beta);
        let beta = tape.cx_reshape(beta, &shape)?;
        let scaled = tape.cx_mul(normalized, gamma)?;
        tape.cx_add(scaled, beta)
    }

    fn queue_running_update<T: Scalar>(
        &self,
        b: &mut Binder<T>,
        sr: &BatchStats<T>,
        si: &BatchStats<T>,
        count: usize,
    ) -> Result<()> {
        let m = T::lit(self.momentum);
        let keep = T::one() - m;
        let unbias = T::from_usize(count).unwrap() / T::from_usize(count.max(2) - 1).unwrap();
        let blend = |old: &[T], new: &[T], scale: T| -> Vec<T> {
            old.iter().zip(new).map(|(&o, &n)| keep * o + m * n * scale).collect()
        };
        let (rm, rv) = (b.params().get(self.running_mean), b.params().get(self.running_var));
        let c = self.channels;
        let mean = CxTensor::new(
            Tensor::from_vec([c], blend(rm.re().data(), &sr.mean, T::one()))?,
            Tensor::from_vec([c], blend(rm.im().data(), &si.mean, T::one()))?,
        )?;
        let var = CxTensor::new(
            Tensor::from_vec([c], blend(rv.re().data(), &sr.var, unbias))?,
            Tensor::from_vec([c], blend(rv.im().data(), &si.var, unbias))?,
        )?;
        b.update_buffer(self.running_mean, mean);
        b.update_buffer(self.running_var, var);
        Ok(())
    }

    fn normalize_with_running<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        b: &mut Binder<T>,
        x: CxVar,
        rank: usize,
    ) -> Result<CxVar> {
        let (rm, rv) = (b.params().get(self.running_mean), b.params().get(self.running_var));
        let eps = T::lit(self.eps);
        let mut shape = vec![1; rank];
        shape[1] = self.channels;
        let mut plane = |x: crate::tape::Var, mean: &Tensor<T>, var: &Tensor<T>| -> Result<crate::tape::Var> {
            let scale: Vec<T> = var.data().iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            let shift: Vec<T> = mean.data().iter().zip(&scale).map(|(&mu, &s)| -mu * s).collect();
            let scale = tape.constant(Tensor::from_vec(shape.clone(), scale)?);
            let shift = tape.constant(Tensor::from_vec(shape.clone(), shift)?);
            let y = tape.mul(x, scale)?;
            tape.add(y, shift)
        };
        Ok(CxVar { re: plane(x.re, rm.re(), rv.re())?, im: plane(x.im, rm.im(), rv.im())? })
    }
}
