use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuParams {
    /// mean reversion, 1/step
    pub theta: f64,
    /// U/h per sqrt(step)
    pub sigma: f64,
    /// U/h
    pub mu: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        OuParams {
            theta: 0.05,
            sigma: 0.2,
            mu: 0.0,
        }
    }
}

impl OuParams {
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }
}

/// Euler-Maruyama step `x + theta (mu - x) dt + sigma sqrt(dt) N(0, 1)`.
pub fn ou_step<R: Rng + ?Sized>(params: &OuParams, x: f64, dt: f64, rng: &mut R) -> f64 {
    let z: f64 = if params.sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
    x + params.theta * (params.mu - x) * dt + params.sigma * dt.sqrt() * z
}

#[derive(Debug, Clone)]
pub struct OuProcess {
    pub params: OuParams,
    pub x: f64,
}

impl OuProcess {
    /// Starts at the mean.
    pub fn new(params: OuParams) -> Self {
        OuProcess { params, x: params.mu }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.x = ou_step(&self.params, self.x, 1.0, rng);
        self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;

    #[test]
    fn noiseless_mean_reversion_is_geometric() {
        let p = OuParams { theta: 0.1, sigma: 0.0, mu: 0.0 };
        let mut rng = stream(0, "ou", &[]);
        let mut x = 1.0;
        for k in 1..=50 {
            x = ou_step(&p, x, 1.0, &mut rng);
            assert!((x - 0.9f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_is_a_fixed_point_without_noise() {
        let p = OuParams { theta: 0.3, sigma: 0.0, mu: 0.7 };
        let mut rng = stream(0, "ou", &[]);
        assert_eq!(ou_step(&p, 0.7, 2.5, &mut rng), 0.7);
    }
}
