//! Adaptive-moment (Adam) optimiser with bias correction.

use serde::{Deserialize, Serialize};

use super::tensor::TensorOf;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for a fixed, ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: AdamConfig, params: &[&TensorOf<T>]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            second: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut TensorOf<T>], grads: &[TensorOf<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.first[i].len() {
                return Err(Error::Shape(format!("parameter {i} length mismatch")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr = T::of(c.learning_rate * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        // Epsilon is applied to the bias-corrected second moment.
        let eps = T::of(c.epsilon * (1.0 - c.beta2.powi(t)).sqrt());
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (nb1, nb2) = (T::one() - b1, T::one() - b2);
        // Moments of parameters whose gradient stays zero decay geometrically;
        // flushing them at the normal-range floor avoids slow subnormal arithmetic.
        let tiny = T::min_positive_value();
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + nb1 * g;
                *v = b2 * *v + nb2 * g * g;
                if m.abs() < tiny {
                    *m = T::zero();
                }
                if *v < tiny {
                    *v = T::zero();
                }
                *w -= lr * *m / (v.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = TensorOf::vector(vec![0.5f32, -1.0, 2.0]);
        let before = p.clone();
        let mut opt = OptimizerState::new(AdamConfig::default(), &[&p]);
        for _ in 0..10 {
            opt.step(&mut [&mut p], &[TensorOf::zeros(&[3])]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_moves_by_step_size() {
        let mut p = TensorOf::vector(vec![0.0f64; 2]);
        let g = TensorOf::vector(vec![3.0, -0.02]);
        let mut opt = OptimizerState::new(AdamConfig::default(), &[&p]);
        let mut last = p.clone();
        for _ in 0..500 {
            opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            let delta: Vec<f64> = p.data().iter().zip(last.data()).map(|(a, b)| a - b).collect();
            assert!((delta[0].abs() - 1e-3).abs() < 1e-6);
            assert!((delta[1].abs() - 1e-3).abs() < 1e-6);
            assert!(delta[0] < 0.0 && delta[1] > 0.0);
            last = p.clone();
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = TensorOf::vector(vec![0.0f32; 2]);
        let mut opt = OptimizerState::new(AdamConfig::default(), &[&p]);
        assert!(opt.step(&mut [&mut p], &[TensorOf::zeros(&[3])]).is_err());
    }
}
