use rand::Rng;

use crate::cx::CxVar;
use crate::error::{shape_err, Error, Result};
use crate::kernels::{conv_out_len, conv_t_out_len, ConvSpec};
use crate::layers::spectral::{self, SpectralNorm};
use crate::params::{Binder, ParamId, ParamSet};
use crate::tape::Tape;
use crate::tensor::CxTensor;
use crate::Scalar;

/// Stand-alone convolution hyperparameters and weights, for value-level use.
///
/// `weight` is `(C_out, C_in, k_t, k_f)` for a forward convolution and
/// `(C_in, C_out, k_t, k_f)` when `transposed`.
#[derive(Clone, Debug)]
pub struct CxConvParams<T> {
    pub weight: CxTensor<T>,
    pub bias: Option<CxTensor<T>>,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub transposed: bool,
}

impl<T: Scalar> CxConvParams<T> {
    pub fn spec(&self) -> ConvSpec {
        ConvSpec { stride: self.stride, padding: self.padding }
    }

    fn validate(&self) -> Result<()> {
        let d = self.weight.dims();
        if d.len() != 4 {
            return Err(shape_err!("kernel must be rank 4, got {d:?}"));
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(Error::Config(format!("stride {:?} must be positive", self.stride)));
        }
        Ok(())
    }
}

/// Value-level complex convolution (see [`Tape::cx_conv2d`]).
pub fn cx_conv2d<T: Scalar>(x: &CxTensor<T>, p: &CxConvParams<T>) -> Result<CxTensor<T>> {
    p.validate()?;
    if p.transposed {
        return Err(Error::Argument("cx_conv2d called with transposed parameters".into()));
    }
    let mut tape = Tape::new();
    let xv = tape.cx_constant(x);
    let w = tape.cx_constant(&p.weight);
    let b = p.bias.as_ref().map(|b| tape.cx_constant(b));
    let z = tape.cx_conv2d(xv, w, b, p.spec())?;
    Ok(tape.cx_value(z))
}

/// Value-level complex transposed convolution. `output_padding` resolves the
/// ambiguity of the inverted extent.
pub fn cx_conv_transpose2d<T: Scalar>(
    x: &CxTensor<T>,
    p: &CxConvParams<T>,
    output_padding: (usize, usize),
) -> Result<CxTensor<T>> {
    p.validate()?;
    let (xd, wd) = (x.dims(), p.weight.dims());
    if xd.len() != 4 {
        return Err(shape_err!("input must be rank 4, got {xd:?}"));
    }
    let out = (
        conv_t_out_len(xd[2], wd[2], p.stride.0, p.padding.0, output_padding.0),
        conv_t_out_len(xd[3], wd[3], p.stride.1, p.padding.1, output_padding.1),
    );
    let (Some(oh), Some(ow)) = out else {
        return Err(shape_err!("transposed conv output would be empty"));
    };
    let mut tape = Tape::new();
    let xv = tape.cx_constant(x);
    let w = tape.cx_constant(&p.weight);
    let b = p.bias.as_ref().map(|b| tape.cx_constant(b));
    let z = tape.cx_conv_transpose2d(xv, w, b, p.spec(), (oh, ow))?;
    Ok(tape.cx_value(z))
}

/// Convolution layer bound to a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct CxConv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub transposed: bool,
    pub spectral: Option<SpectralNorm>,
}

impl CxConv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        transposed: bool,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if c_in == 0 || c_out == 0 || kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::Config(format!(
                "{name}: channels {c_in}->{c_out}, kernel {kernel:?}, stride {stride:?} must be positive"
            )));
        }
        let fan_in = c_in * kernel.0 * kernel.1;
        let std = (1.0 / (2.0 * fan_in as f64)).sqrt();
        let dims = if transposed {
            [c_in, c_out, kernel.0, kernel.1]
        } else {
            [c_out, c_in, kernel.0, kernel.1]
        };
        let weight = params.add(format!("{name}.weight"), CxTensor::randn(dims, std, rng)?);
        let bias = bias.then(|| params.add(format!("{name}.bias"), CxTensor::zeros([c_out]).unwrap()));
        Ok(Self { weight, bias, c_in, c_out, kernel, stride, padding, transposed, spectral: None })
    }

    /// Attaches spectral normalization, running `init_iters` power iterations.
    pub fn with_spectral_norm<T: Scalar, R: Rng + ?Sized>(
        mut self,
        params: &mut ParamSet<T>,
        name: &str,
        init_iters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        self.spectral = Some(SpectralNorm::new(params, name, self.weight, init_iters, rng)?);
        Ok(self)
    }

    pub fn spec(&self) -> ConvSpec {
        ConvSpec { stride: self.stride, padding: self.padding }
    }

    /// Spatial output extent of the forward convolution.
    pub fn out_len(&self, t: usize, f: usize) -> Result<(usize, usize)> {
        match (
            conv_out_len(t, self.kernel.0, self.stride.0, self.padding.0),
            conv_out_len(f, self.kernel.1, self.stride.1, self.padding.1),
        ) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(shape_err!("{t}x{f} input too small for kernel {:?} with padding {:?}", self.kernel, self.padding)),
        }
    }

    pub fn preserves_shape(&self) -> bool {
        !self.transposed
            && self.c_in == self.c_out
            && self.stride == (1, 1)
            && 2 * self.padding.0 + 1 == self.kernel.0
            && 2 * self.padding.1 + 1 == self.kernel.1
    }

    pub fn param_count(&self) -> usize {
        self.c_in * self.c_out * self.kernel.0 * self.kernel.1 + self.bias.map_or(0, |_| self.c_out)
    }

    fn kernel_var<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>) -> Result<CxVar> {
        let w = b.var(tape, self.weight);
        match &self.spectral {
            Some(sn) => {
                let u = b.params().get(sn.u).re().clone();
                let v = b.params().get(sn.v).re().clone();
                spectral::normalize_on_tape(tape, w, &u, &v)
            }
            None => Ok(w),
        }
    }

    fn check_input<T: Scalar>(&self, tape: &Tape<T>, x: CxVar) -> Result<()> {
        let d = tape.cx_dims(x);
        if d.len() != 4 || d[1] != self.c_in {
            return Err(shape_err!("layer expects (B,{},T,F) input, got {d:?}", self.c_in));
        }
        Ok(())
    }

    /// Forward convolution.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, x: CxVar) -> Result<CxVar> {
        debug_assert!(!self.transposed);
        self.check_input(tape, x)?;
        let w = self.kernel_var(tape, b)?;
        let bias = self.bias.map(|id| b.var(tape, id));
        tape.cx_conv2d(x, w, bias, self.spec())
    }

    /// Transposed convolution onto an explicit `(T, F)` extent.
    pub fn forward_to<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        b: &mut Binder<T>,
        x: CxVar,
        out_hw: (usize, usize),
    ) -> Result<CxVar> {
        debug_assert!(self.transposed);
        self.check_input(tape, x)?;
        let w = self.kernel_var(tape, b)?;
        let bias = self.bias.map(|id| b.var(tape, id));
        tape.cx_conv_transpose2d(x, w, bias, self.spec(), out_hw)
    }
}
