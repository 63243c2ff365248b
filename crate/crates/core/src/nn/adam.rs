use serde::{Deserialize, Serialize};

use super::param::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update at step `t` (1-based). Coupled L2 decay is
/// folded into the gradient for matrix parameters before the moment update.
pub fn adam_step(p: &mut Parameter, cfg: &AdamConfig, t: u64) -> Result<()> {
    debug_assert!(t >= 1);
    if !p.grad.is_finite() {
        return Err(Error::NonFiniteGradient(p.name.clone()));
    }
    let decay = if p.decays() { cfg.weight_decay } else { 0.0 };
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    let value = p.value.data_mut();
    let grad = p.grad.data();
    let m = p.adam_m.data_mut();
    let v = p.adam_v.data_mut();
    for k in 0..value.len() {
        let g = grad[k] + decay * value[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[k] / bc1;
        let v_hat = v[k] / bc2;
        value[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    p.steps = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn zero_grad_is_fixed_point() {
        let mut p = Parameter::new("w", Tensor::matrix(1, 2, vec![0.3, -0.7]).unwrap());
        let before = p.clone();
        adam_step(&mut p, &AdamConfig::default(), 1).unwrap();
        assert_eq!(p.value, before.value);
        assert_eq!(p.adam_m, before.adam_m);
        assert_eq!(p.adam_v, before.adam_v);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Parameter::new("s", Tensor::vector(vec![0.0]));
        p.grad = Tensor::vector(vec![1.0]);
        adam_step(&mut p, &AdamConfig::default(), 1).unwrap();
        assert!((p.value.data()[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn rejects_nan_grad() {
        let mut p = Parameter::new("bad", Tensor::vector(vec![0.0]));
        p.grad = Tensor::vector(vec![f64::NAN]);
        let err = adam_step(&mut p, &AdamConfig::default(), 1).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn decay_skips_vectors() {
        let cfg = AdamConfig { weight_decay: 0.5, ..AdamConfig::default() };
        let mut b = Parameter::new("b", Tensor::vector(vec![1.0]));
        adam_step(&mut b, &cfg, 1).unwrap();
        assert_eq!(b.value.data(), &[1.0]);
        let mut w = Parameter::new("w", Tensor::matrix(1, 1, vec![1.0]).unwrap());
        adam_step(&mut w, &cfg, 1).unwrap();
        assert!(w.value.data()[0] < 1.0);
    }
}
