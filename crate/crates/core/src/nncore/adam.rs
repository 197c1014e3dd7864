use serde::{Deserialize, Serialize};

use super::weights::WeightVector;
use crate::error::Result;

/// Adam moment estimates for one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(len: usize) -> Self {
        Self::with_params(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `weights` in place.
    pub fn step(&mut self, weights: &mut WeightVector, grads: &WeightVector, lr: f64) -> Result<()> {
        weights.check_layout(grads)?;
        debug_assert_eq!(self.m.len(), weights.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((w, g), m), v) in weights
            .values_mut()
            .iter_mut()
            .zip(grads.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
