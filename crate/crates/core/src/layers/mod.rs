//! Complex-valued layers: convolution, transposed convolution, split batch
//! normalization, split leaky rectification, spectral normalization and the
//! blocks built from them.

mod batchnorm;
mod blocks;
mod conv;
mod spectral;

pub use batchnorm::{BatchNormKind, CxBatchNorm};
pub use blocks::{DecoderBlock, EncoderBlock, SkipConvBlock};
pub use conv::{cx_conv2d, cx_conv_transpose2d, CxConv, CxConvParams};
pub use spectral::{embed_real_block, power_iteration, spectral_normalize, SpectralNorm, SpectralNormState};

use crate::cx::CxVar;
use crate::tape::Tape;
use crate::Scalar;

/// Default negative slope of the split leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Leaky rectification applied independently to the real and imaginary planes.
pub fn cx_leaky_relu<T: Scalar>(tape: &mut Tape<T>, x: CxVar, slope: f64) -> CxVar {
    tape.cx_leaky_relu(x, T::lit(slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CxTensor;

    #[test]
    fn split_leaky_relu_values() {
        let mut tape = Tape::new();
        let x = tape.cx_constant(&CxTensor::from_vecs([2], vec![-1.0, 3.0], vec![2.0, 0.5]).unwrap());
        let y = cx_leaky_relu(&mut tape, x, 0.2);
        let y = tape.cx_value(y);
        assert_eq!(y.at(&[0]), (-0.2, 2.0));
        assert_eq!(y.at(&[1]), (3.0, 0.5));
    }
}
