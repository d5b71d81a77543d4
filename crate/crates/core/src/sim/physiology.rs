use super::{PatientParams, PatientState};
use crate::{Error, Result};

pub const INTERNAL_SUBSTEP_MINUTES: f64 = 1.0;
const GLUCOSE_FLOOR: f64 = 1.0;

/// Right-hand side of the compartmental model.
///
/// State order: glucose, remote action, plasma insulin, depot 1, depot 2,
/// gut 1, gut 2. `basal_u_per_min` is the continuous pump infusion.
pub fn derivatives(y: &[f64; 7], p: &PatientParams, basal_u_per_min: f64) -> [f64; 7] {
    let [g, x, i, s1, s2, q1, q2] = *y;
    let ka = p.insulin_absorption_rate;
    let kabs = p.gut_absorption_rate;
    let appearance = 1000.0 * p.carb_bioavailability * kabs * q2 / p.glucose_volume_dl();
    [
        -(p.glucose_effectiveness + x) * g + p.endogenous_glucose_production + appearance,
        p.insulin_action_rate * (p.insulin_sensitivity * i - x),
        1000.0 * ka * s2 / p.insulin_volume_l() - p.insulin_clearance_rate * i,
        basal_u_per_min - ka * s1,
        ka * (s1 - s2),
        -kabs * q1,
        kabs * (q1 - q2),
    ]
}

fn rk4(y: &[f64; 7], p: &PatientParams, u: f64, h: f64) -> [f64; 7] {
    let add = |a: &[f64; 7], b: &[f64; 7], s: f64| -> [f64; 7] {
        let mut out = *a;
        for k in 0..7 {
            out[k] += s * b[k];
        }
        out
    };
    let k1 = derivatives(y, p, u);
    let k2 = derivatives(&add(y, &k1, h / 2.0), p, u);
    let k3 = derivatives(&add(y, &k2, h / 2.0), p, u);
    let k4 = derivatives(&add(y, &k3, h), p, u);
    let mut out = *y;
    for k in 0..7 {
        out[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    out
}

/// Advances the patient by `dt` minutes. The bolus enters the first
/// subcutaneous depot and the carbohydrates enter the first gut compartment
/// at the start of the interval; basal is infused continuously throughout.
pub fn step_physiology(
    state: &PatientState,
    params: &PatientParams,
    basal_u_per_h: f64,
    bolus_u: f64,
    carbs_g: f64,
    dt: f64,
) -> Result<PatientState> {
    step_physiology_with_substep(state, params, basal_u_per_h, bolus_u, carbs_g, dt, INTERNAL_SUBSTEP_MINUTES)
}

pub fn step_physiology_with_substep(
    state: &PatientState,
    params: &PatientParams,
    basal_u_per_h: f64,
    bolus_u: f64,
    carbs_g: f64,
    dt: f64,
    substep: f64,
) -> Result<PatientState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(substep > 0.0) {
        return Err(Error::invalid("substep", "must be > 0"));
    }
    for (name, v) in [("basal_rate", basal_u_per_h), ("bolus", bolus_u), ("carbs", carbs_g)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    let mut y = state.to_vector();
    y[3] += bolus_u;
    y[5] += carbs_g;
    let n = (dt / substep).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let u = basal_u_per_h / 60.0;
    for _ in 0..n {
        y = rk4(&y, params, u, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged {
                clock: state.clock,
                detail: format!("non-finite state {y:?}"),
            });
        }
        y[0] = y[0].max(GLUCOSE_FLOOR);
        for v in &mut y[1..] {
            *v = v.max(0.0);
        }
    }
    Ok(PatientState::from_vector(y, state.clock + dt))
}
