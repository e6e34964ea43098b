use crate::error::{shape_err, Result};
use crate::params::ParamSet;
use crate::tensor::CxTensor;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// Moment estimates for every entry of one [`ParamSet`], kept per plane.
#[derive(Clone, Debug, Default)]
pub struct AdamState<T> {
    moments: Vec<Option<[Vec<T>; 4]>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new() -> Self {
        Self { moments: Vec::new(), step: 0 }
    }

    /// Bias-corrected Adam with decoupled weight decay. Entries without a
    /// gradient (buffers, unbound parameters) are left untouched.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<CxTensor<T>>], cfg: &AdamConfig) -> Result<()> {
        if grads.len() > params.len() {
            return Err(shape_err!("{} gradients for {} parameters", grads.len(), params.len()));
        }
        for (id, g) in params.ids().zip(grads) {
            if let Some(g) = g {
                if g.dims() != params.get(id).dims() {
                    return Err(shape_err!(
                        "gradient shape {:?} does not match parameter `{}` {:?}",
                        g.dims(),
                        params.entries()[id.index()].name,
                        params.get(id).dims()
                    ));
                }
            }
        }
        self.moments.resize(params.len(), None);
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let (lr, eps, decay) = (T::lit(cfg.lr), T::lit(cfg.eps), T::one() - T::lit(cfg.lr * cfg.weight_decay));
        let ids: Vec<_> = params.ids().collect();
        for (id, g) in ids.into_iter().zip(grads) {
            let Some(g) = g else { continue };
            if !params.entries()[id.index()].trainable {
                continue;
            }
            let n = g.numel();
            let m = self.moments[id.index()].get_or_insert_with(|| std::array::from_fn(|_| vec![T::zero(); n]));
            let (pr, pi) = params.get_mut(id).planes_mut();
            let [mr, vr, mi, vi] = m;
            for (p, g, m, v) in [(pr, g.re().data(), mr, vr), (pi, g.im().data(), mi, vi)] {
                for k in 0..n {
                    m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                    v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                    let mh = m[k] / c1;
                    let vh = v[k] / c2;
                    p[k] = p[k] * decay - lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CxTensor;

    fn one_param() -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.add("w", CxTensor::from_vecs([3], vec![1.0, -2.0, 0.5], vec![0.0, 3.0, -1.0]).unwrap());
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one_param();
        let before = p.clone();
        let mut st = AdamState::new();
        st.step(&mut p, &[Some(CxTensor::zeros([3]).unwrap())], &AdamConfig::default()).unwrap();
        assert!(p.bit_eq(&before));
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one_param();
        let before = p.get(crate::params::ParamId(0)).clone();
        let mut st = AdamState::new();
        let g = CxTensor::from_vecs([3], vec![0.3, -5.0, 2.0], vec![1.0, 1e-3, -7.0]).unwrap();
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        st.step(&mut p, &[Some(g.clone())], &cfg).unwrap();
        let after = p.get(crate::params::ParamId(0));
        for (plane_a, plane_b, grad) in [
            (after.re().data(), before.re().data(), g.re().data()),
            (after.im().data(), before.im().data(), g.im().data()),
        ] {
            for k in 0..3 {
                let expect = -0.01 * grad[k] / (grad[k].abs() + 1e-8);
                assert!((plane_a[k] - plane_b[k] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = one_param();
        let mut st = AdamState::new();
        let r = st.step(&mut p, &[Some(CxTensor::zeros([2]).unwrap())], &AdamConfig::default());
        assert!(matches!(r, Err(crate::error::Error::Shape(_))));
    }
}
