use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over a flattened parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    /// One update of `params` against `grad` at step size `lr`.
    pub fn step_flat(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bias1 = T::of(1.0 - c.beta1.powi(self.t));
        let bias2 = T::of(1.0 - c.beta2.powi(self.t));
        let (lr, eps) = (T::of(lr), T::of(c.eps));
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mhat = self.m[i] / bias1;
            let vhat = self.v[i] / bias2;
            params[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }

    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grad: &P, lr: f64) {
        let mut flat = params.to_flat();
        self.step_flat(&mut flat, &grad.to_flat(), lr);
        params.set_flat(&flat);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut adam = Adam::<f64>::new(AdamConfig::default(), 2);
        let mut p = vec![1.0, -1.0];
        adam.step_flat(&mut p, &[0.5, -2.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), 1);
        let mut p = vec![5.0];
        for _ in 0..5000 {
            let g = 2.0 * (p[0] - 3.0);
            adam.step_flat(&mut p, &[g], 0.05);
        }
        assert!((p[0] - 3.0).abs() < 1e-3);
    }
}
