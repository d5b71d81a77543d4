use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FEATURE_DIM: usize = 12;
pub const GLUCOSE_HISTORY_LEN: usize = 10;
/// Steps between consecutive glucose history entries (30 min at 3 min).
pub const GLUCOSE_HISTORY_SPACING: usize = 10;
/// Length of the linearly decaying insulin and carbohydrate activity window.
pub const ACTIVITY_WINDOW: usize = 80;

/// `[g_t, g_{t-10}, ..., g_{t-90}, I_t, M_t]`, most recent reading first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn glucose_history(&self) -> &[f64] {
        &self.0[..GLUCOSE_HISTORY_LEN]
    }

    pub fn insulin_activity(&self) -> f64 {
        self.0[GLUCOSE_HISTORY_LEN]
    }

    pub fn carb_activity(&self) -> f64 {
        self.0[GLUCOSE_HISTORY_LEN + 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Anything that carries the per-step quantities the features are built
/// from.
pub trait RawStep {
    fn cgm(&self) -> f64;
    fn basal_u_per_h(&self) -> f64;
    fn bolus_u(&self) -> f64;
    fn carbs_g(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub cgm: f64,
    pub basal_u_per_h: f64,
    pub bolus_u: f64,
    pub carbs_g: f64,
}

impl RawStep for RawRecord {
    fn cgm(&self) -> f64 {
        self.cgm
    }
    fn basal_u_per_h(&self) -> f64 {
        self.basal_u_per_h
    }
    fn bolus_u(&self) -> f64 {
        self.bolus_u
    }
    fn carbs_g(&self) -> f64 {
        self.carbs_g
    }
}

/// Values assumed before the first logged step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Padding {
    pub cgm: f64,
    pub basal_u_per_h: f64,
}

/// Builds the feature vector from a history whose last element is the most
/// recent step. Basal rates are converted to units delivered per step.
pub fn featurize<S: RawStep>(
    history: &[S],
    padding: Option<&Padding>,
    control_period_minutes: f64,
) -> Result<FeatureVector> {
    let n = history.len();
    let needed_cgm = (GLUCOSE_HISTORY_LEN - 1) * GLUCOSE_HISTORY_SPACING + 1;
    if padding.is_none() {
        let needed = needed_cgm.max(ACTIVITY_WINDOW);
        if n < needed {
            return Err(Error::InsufficientHistory { needed, available: n });
        }
    }
    let per_step = control_period_minutes / 60.0;
    let mut out = [0.0; FEATURE_DIM];
    for (k, slot) in out.iter_mut().take(GLUCOSE_HISTORY_LEN).enumerate() {
        let offset = k * GLUCOSE_HISTORY_SPACING;
        *slot = if offset < n {
            history[n - 1 - offset].cgm()
        } else {
            padding.map(|p| p.cgm).unwrap_or_default()
        };
    }
    let mut insulin = 0.0;
    let mut carbs = 0.0;
    for offset in 0..ACTIVITY_WINDOW {
        let w = 1.0 - offset as f64 / ACTIVITY_WINDOW as f64;
        let (u, c) = if offset < n {
            let s = &history[n - 1 - offset];
            (s.basal_u_per_h() * per_step + s.bolus_u(), s.carbs_g())
        } else {
            (padding.map(|p| p.basal_u_per_h * per_step).unwrap_or_default(), 0.0)
        };
        insulin += w * u;
        carbs += w * c;
    }
    out[GLUCOSE_HISTORY_LEN] = insulin;
    out[GLUCOSE_HISTORY_LEN + 1] = carbs;
    Ok(FeatureVector(out))
}
