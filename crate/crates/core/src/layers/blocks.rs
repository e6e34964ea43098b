use rand::Rng;

use crate::cx::CxVar;
use crate::error::{shape_err, Error, Result};
use crate::layers::{cx_leaky_relu, BatchNormKind, CxBatchNorm, CxConv, LEAKY_SLOPE};
use crate::params::{Binder, ParamSet};
use crate::tape::Tape;
use crate::Scalar;

/// Residual block `x + act(bn(conv(x)))` on a skip connection.
#[derive(Clone, Debug)]
pub struct SkipConvBlock {
    pub conv: CxConv,
    pub bn: CxBatchNorm,
}

impl SkipConvBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        bn: BatchNormKind,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = CxConv::new(params, &format!("{name}.conv"), channels, channels, kernel, stride, padding, false, true, rng)?;
        if !conv.preserves_shape() {
            return Err(Error::Config(format!(
                "{name}: SkipConv convolution must preserve shape (kernel {kernel:?}, stride {stride:?}, padding {padding:?})"
            )));
        }
        let bn = CxBatchNorm::new(params, &format!("{name}.bn"), channels, bn)?;
        Ok(Self { conv, bn })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, x: CxVar) -> Result<CxVar> {
        let z = self.conv.forward(tape, b, x)?;
        let z = self.bn.forward(tape, b, z)?;
        let z = cx_leaky_relu(tape, z, LEAKY_SLOPE);
        tape.cx_add(x, z)
    }
}

/// Downsampling block `act(bn(conv(x)))`.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub conv: CxConv,
    pub bn: CxBatchNorm,
    pub slope: f64,
}

impl EncoderBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        bn: BatchNormKind,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = CxConv::new(params, &format!("{name}.conv"), c_in, c_out, kernel, stride, padding, false, true, rng)?;
        let bn = CxBatchNorm::new(params, &format!("{name}.bn"), c_out, bn)?;
        Ok(Self { conv, bn, slope: LEAKY_SLOPE })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, x: CxVar) -> Result<CxVar> {
        let z = self.conv.forward(tape, b, x)?;
        let z = self.bn.forward(tape, b, z)?;
        Ok(cx_leaky_relu(tape, z, self.slope))
    }
}

/// Upsampling block `act(bn(tconv(concat(x, skip))))`; the output block of a
/// network has neither normalization nor activation.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub conv: CxConv,
    pub bn: Option<CxBatchNorm>,
    pub slope: Option<f64>,
}

impl DecoderBlock {
    /// `c_in` counts the channels after concatenation with the skip features.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        last: bool,
        bn: BatchNormKind,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = CxConv::new(params, &format!("{name}.tconv"), c_in, c_out, kernel, stride, padding, true, true, rng)?;
        let bn = if last { None } else { Some(CxBatchNorm::new(params, &format!("{name}.bn"), c_out, bn)?) };
        Ok(Self { conv, bn, slope: (!last).then_some(LEAKY_SLOPE) })
    }

    /// Concatenates `skip` (if any) after `x` along channels, then upsamples
    /// onto `out_hw`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        b: &mut Binder<T>,
        x: CxVar,
        skip: Option<CxVar>,
        out_hw: (usize, usize),
    ) -> Result<CxVar> {
        let x = match skip {
            Some(s) => {
                let (dx, ds) = (tape.cx_dims(x), tape.cx_dims(s));
                if dx.len() != 4 || ds.len() != 4 || dx[0] != ds[0] || dx[2..] != ds[2..] {
                    return Err(shape_err!("skip features {ds:?} do not align with decoder input {dx:?}"));
                }
                tape.cx_concat(&[x, s], 1)?
            }
            None => x,
        };
        let mut z = self.conv.forward_to(tape, b, x, out_hw)?;
        if let Some(bn) = &self.bn {
            z = bn.forward(tape, b, z)?;
        }
        if let Some(slope) = self.slope {
            z = cx_leaky_relu(tape, z, slope);
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Mode;
    use crate::tensor::CxTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_kernel_skip_chain_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut params = ParamSet::<f64>::new();
        let blocks: Vec<_> = (0..3)
            .map(|i| {
                SkipConvBlock::new(&mut params, &format!("sb{i}"), 2, (3, 3), (1, 1), (1, 1), BatchNormKind::Split, &mut rng)
                    .unwrap()
            })
            .collect();
        for blk in &blocks {
            let z = CxTensor::zeros(params.get(blk.conv.weight).dims()).unwrap();
            params.set(blk.conv.weight, z);
        }
        let x = CxTensor::<f64>::randn([2, 2, 4, 5], 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let mut b = Binder::new(&params, true, Mode::Train);
        let mut h = tape.cx_constant(&x);
        for blk in &blocks {
            h = blk.forward(&mut tape, &mut b, h).unwrap();
        }
        assert!(tape.cx_value(h).bit_eq(&x));
    }

    #[test]
    fn shape_changing_skip_conv_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut params = ParamSet::<f64>::new();
        let r = SkipConvBlock::new(&mut params, "sb", 2, (3, 3), (1, 2), (1, 1), BatchNormKind::Split, &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn encoder_then_decoder_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut params = ParamSet::<f64>::new();
        let enc = EncoderBlock::new(&mut params, "e", 1, 16, (5, 3), (1, 2), (2, 1), BatchNormKind::Split, &mut rng).unwrap();
        let dec = DecoderBlock::new(&mut params, "d", 16, 1, (5, 3), (1, 2), (2, 1), true, BatchNormKind::Split, &mut rng).unwrap();
        let x = CxTensor::<f64>::randn([2, 1, 16, 33], 1.0, &mut rng).unwrap();
        let mut tape = Tape::new();
        let mut b = Binder::new(&params, true, Mode::Train);
        let xv = tape.cx_constant(&x);
        let e = enc.forward(&mut tape, &mut b, xv).unwrap();
        assert_eq!(tape.cx_dims(e), vec![2, 16, 16, 17]);
        let d = dec.forward(&mut tape, &mut b, e, None, (16, 33)).unwrap();
        assert_eq!(tape.cx_dims(d), vec![2, 1, 16, 33]);
        let bad = tape.cx_constant(&CxTensor::zeros([2, 16, 16, 9]).unwrap());
        assert!(matches!(dec.forward(&mut tape, &mut b, e, Some(bad), (16, 33)), Err(Error::Shape(_))));
    }
}
