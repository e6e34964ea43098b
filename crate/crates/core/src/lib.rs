//! Complex-valued tensors, reverse-mode differentiation over real planes, and
//! the complex convolutional GAN built on them.

pub mod cx;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod kernels;
pub mod layers;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod tfsa;

pub use cx::CxVar;
pub use error::{Error, Result};
pub use params::{Binder, Mode, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{CxBinary, CxTensor, Shape, Tensor};

pub type CxTensor64 = CxTensor<f64>;
pub type CxTensor32 = CxTensor<f32>;
