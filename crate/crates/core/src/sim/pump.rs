use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PumpConfig {
    pub basal_resolution_u_per_h: f64,
    pub min_basal_u_per_h: f64,
    pub bolus_resolution_u: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            basal_resolution_u_per_h: 0.05,
            min_basal_u_per_h: 0.0,
            bolus_resolution_u: 0.05,
        }
    }
}

// Absorbs representation error so that k * res / res floors back to k.
const GRID_EPS: f64 = 1e-9;

fn floor_to_grid(x: f64, res: f64) -> f64 {
    let k = (x / res + GRID_EPS).floor();
    k * res
}

/// Clamps a basal rate to `[min_basal, max_basal]` and floors it onto the
/// pump's basal grid.
pub fn quantize_dose(pump: &PumpConfig, basal_u_per_h: f64, max_basal_u_per_h: f64) -> f64 {
    let x = if basal_u_per_h.is_nan() { 0.0 } else { basal_u_per_h };
    let clamped = x.clamp(pump.min_basal_u_per_h, max_basal_u_per_h);
    floor_to_grid(clamped, pump.basal_resolution_u_per_h)
        .max(pump.min_basal_u_per_h)
        .min(max_basal_u_per_h)
}

pub fn quantize_bolus(pump: &PumpConfig, bolus_u: f64) -> f64 {
    if !(bolus_u > 0.0) {
        return 0.0;
    }
    floor_to_grid(bolus_u, pump.bolus_resolution_u)
}
