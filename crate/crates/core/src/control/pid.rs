use serde::{Deserialize, Serialize};

use super::{OuParams, OuProcess};
use crate::env::{BasalController, Observation};
use crate::seeds::SimRng;

fn default_integral_limit() -> f64 {
    1e5
}

/// Gains of the basal PID law
/// `kp (g_target - g_t) + ki sum(g - g_target) + kd (g_t - g_{t-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub g_target: f64,
    /// symmetric wind-up bound on the accumulated error, mg/dl * steps
    #[serde(default = "default_integral_limit")]
    pub integral_limit: f64,
}

impl PidParams {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        PidParams {
            kp,
            ki,
            kd,
            g_target: 144.0,
            integral_limit: default_integral_limit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral_error: f64,
    pub previous_glucose: f64,
}

impl PidState {
    pub fn new(initial_glucose: f64) -> Self {
        PidState {
            integral_error: 0.0,
            previous_glucose: initial_glucose,
        }
    }
}

/// One controller update. Returns the raw (unclamped) basal rate in U/h and
/// the successor state; the pump applies clamping and quantization.
pub fn pid_step(params: &PidParams, state: &PidState, g_t: f64) -> (f64, PidState) {
    let integral = (state.integral_error + (g_t - params.g_target))
        .clamp(-params.integral_limit, params.integral_limit);
    let out = params.kp * (params.g_target - g_t)
        + params.ki * integral
        + params.kd * (g_t - state.previous_glucose);
    (
        out,
        PidState {
            integral_error: integral,
            previous_glucose: g_t,
        },
    )
}

/// PID acting on the latest CGM reading, optionally perturbed by OU noise
/// added to its output before the pump.
#[derive(Debug, Clone)]
pub struct PidController {
    pub params: PidParams,
    pub state: PidState,
    noise: Option<(OuProcess, SimRng)>,
}

impl PidController {
    pub fn new(params: PidParams, initial_glucose: f64) -> Self {
        PidController {
            params,
            state: PidState::new(initial_glucose),
            noise: None,
        }
    }

    pub fn with_noise(mut self, ou: OuParams, rng: SimRng) -> Self {
        self.noise = Some((OuProcess::new(ou), rng));
        self
    }
}

impl BasalController for PidController {
    fn basal_rate(&mut self, obs: &Observation) -> f64 {
        let (out, next) = pid_step(&self.params, &self.state, obs.cgm);
        self.state = next;
        match &mut self.noise {
            Some((ou, rng)) => out + ou.sample(rng),
            None => out,
        }
    }
}
