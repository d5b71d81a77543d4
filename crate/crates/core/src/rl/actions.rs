use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Equal-width bins over the normalized action range `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteActionMap {
    pub n_bins: usize,
}

impl Default for DiscreteActionMap {
    fn default() -> Self {
        DiscreteActionMap { n_bins: 16 }
    }
}

impl DiscreteActionMap {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid("n_bins", "need at least two bins"));
        }
        Ok(DiscreteActionMap { n_bins })
    }

    /// `n_bins + 1` monotone edges from -1 to 1.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_bins).map(|k| -1.0 + 2.0 * k as f64 / self.n_bins as f64).collect()
    }

    pub fn center(&self, bin: usize) -> f64 {
        -1.0 + (2 * bin + 1) as f64 / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.center(k)).collect()
    }

    /// Bin containing `action`; the upper edge 1 belongs to the last bin and
    /// out-of-range values clamp.
    pub fn bin_of(&self, action: f64) -> usize {
        if action.is_nan() {
            return 0;
        }
        let x = ((action + 1.0) / 2.0 * self.n_bins as f64).floor();
        (x.max(0.0) as usize).min(self.n_bins - 1)
    }
}
