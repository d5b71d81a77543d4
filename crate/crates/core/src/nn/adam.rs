use serde::{Deserialize, Serialize};

use super::{Gradient, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(alpha: f64) -> Self {
        AdamConfig { alpha, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { alpha: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let n = net.params().len();
        AdamState { config, first_moment: vec![0.0; n], second_moment: vec![0.0; n], step_count: 0 }
    }

    /// Bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Network, grad: &Gradient) -> Result<()> {
        let n = net.params().len();
        if grad.0.len() != n || self.first_moment.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: grad.0.len() });
        }
        self.step_count += 1;
        let AdamConfig { alpha, beta1, beta2, epsilon } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let params = net.params_mut();
        for i in 0..n {
            let g = grad.0[i];
            let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= alpha * (m / c1) / ((v / c2).sqrt() + epsilon);
        }
        Ok(())
    }
}
