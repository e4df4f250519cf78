use super::params::ParamStore;
use crate::scalar::Scalar;

pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update from the stored gradients.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for p in store.params_mut() {
        let (value, grad, m, v) = (p.value.data_mut(), p.grad.data(), p.m.data_mut(), p.v.data_mut());
        for i in 0..value.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (T::one() - b1) * g;
            v[i] = b2 * v[i] + (T::one() - b2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            value[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Rescales the stored gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(store: &mut ParamStore<T>, max_norm: f64) -> T {
    let norm = store.params().iter().map(|p| p.grad.sum_sq()).sum::<T>().sqrt();
    let max = T::lit(max_norm);
    if norm > max {
        let k = max / norm;
        for p in store.params_mut() {
            p.grad.scale(k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add("w", Tensor::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
        s.params_mut()[0].grad = Tensor::from_vec(vec![0.3, -2.0, 0.0]);
        adam_step(&mut s, &AdamConfig::default());
        let v = s.value(id).data();
        assert!((v[0] - 0.999).abs() < 1e-9);
        assert!((v[1] - 1.001).abs() < 1e-9);
        assert_eq!(v[2], 1.0);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut s = ParamStore::<f64>::new();
        s.add("w", Tensor::from_vec(vec![0.5, -0.25])).unwrap();
        let before = s.params()[0].value.clone();
        for _ in 0..3 {
            adam_step(&mut s, &AdamConfig::default());
        }
        assert_eq!(s.params()[0].value, before);
    }

    #[test]
    fn quadratic_bowl_descends() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add("w", Tensor::from_vec(vec![3.0, -4.0])).unwrap();
        let loss = |w: &[f64]| w[0] * w[0] + 10.0 * w[1] * w[1];
        let start = loss(s.value(id).data());
        let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
        for _ in 0..200 {
            let w = s.value(id).data().to_vec();
            s.params_mut()[0].grad = Tensor::from_vec(vec![2.0 * w[0], 20.0 * w[1]]);
            adam_step(&mut s, &cfg);
        }
        assert!(loss(s.value(id).data()) < start);
    }

    #[test]
    fn clipping() {
        let mut s = ParamStore::<f64>::new();
        s.add("a", Tensor::from_vec(vec![3.0])).unwrap();
        s.add("b", Tensor::from_vec(vec![0.0])).unwrap();
        s.params_mut()[0].grad = Tensor::from_vec(vec![3.0]);
        s.params_mut()[1].grad = Tensor::from_vec(vec![4.0]);
        assert_eq!(clip_global_norm(&mut s, 1.0), 5.0);
        assert!((s.params()[0].grad.data()[0] - 0.6).abs() < 1e-15);
        assert!((s.params()[1].grad.data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(clip_global_norm(&mut s, 10.0), 1.0);
        assert!((s.params()[1].grad.data()[0] - 0.8).abs() < 1e-15);
    }
}
