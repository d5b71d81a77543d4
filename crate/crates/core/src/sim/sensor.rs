use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PatientState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub sample_period_minutes: f64,
    pub noise_sd_mg_dl: f64,
    pub noise_autocorrelation: f64,
    pub output_min_mg_dl: f64,
    pub output_max_mg_dl: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            sample_period_minutes: 3.0,
            noise_sd_mg_dl: 5.0,
            noise_autocorrelation: 0.7,
            output_min_mg_dl: 39.0,
            output_max_mg_dl: 600.0,
        }
    }
}

/// CGM with AR(1) Gaussian error. The error process starts at zero so the
/// first reading carries innovation noise only.
#[derive(Debug, Clone)]
pub struct CgmSensor {
    pub config: SensorConfig,
    error: f64,
}

impl CgmSensor {
    pub fn new(config: SensorConfig) -> Self {
        CgmSensor { config, error: 0.0 }
    }

    pub fn error(&self) -> f64 {
        self.error
    }

    pub fn read<R: Rng + ?Sized>(&mut self, glucose: f64, rng: &mut R) -> f64 {
        let c = &self.config;
        let rho = c.noise_autocorrelation;
        if c.noise_sd_mg_dl > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            self.error = rho * self.error + (1.0 - rho * rho).sqrt() * c.noise_sd_mg_dl * z;
        } else {
            self.error = 0.0;
        }
        (glucose + self.error).clamp(c.output_min_mg_dl, c.output_max_mg_dl)
    }
}

/// Single reading from a fresh sensor.
pub fn read_cgm<R: Rng + ?Sized>(state: &PatientState, sensor: &SensorConfig, rng: &mut R) -> f64 {
    CgmSensor::new(*sensor).read(state.plasma_glucose, rng)
}
