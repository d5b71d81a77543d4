use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distribution volume of plasma insulin.
pub const INSULIN_VOLUME_L_PER_KG: f64 = 0.12;
/// Distribution volume of plasma glucose.
pub const GLUCOSE_VOLUME_DL_PER_KG: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Adult,
    Adolescent,
    Child,
}

impl AgeGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Adult => "adult",
            AgeGroup::Adolescent => "adolescent",
            AgeGroup::Child => "child",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physiological parameters of one virtual patient.
///
/// The dynamics are an extended minimal model: a two-compartment
/// subcutaneous depot feeds plasma insulin, plasma insulin drives a remote
/// insulin action, and a two-compartment gut feeds glucose appearance.
/// Units follow the field names; `insulin_sensitivity` is the gain from
/// plasma insulin (mU/l) to remote action (1/min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    pub id: String,
    pub age_group: AgeGroup,
    pub body_mass_kg: f64,
    pub insulin_sensitivity: f64,
    pub carb_bioavailability: f64,
    pub gut_absorption_rate: f64,
    pub insulin_absorption_rate: f64,
    pub insulin_clearance_rate: f64,
    pub insulin_action_rate: f64,
    pub endogenous_glucose_production: f64,
    pub glucose_effectiveness: f64,
    pub basal_equilibrium_u_per_h: f64,
    pub max_basal_u_per_h: f64,
    pub carb_ratio_g_per_u: f64,
    pub correction_factor_mg_dl_per_u: f64,
}

impl PatientParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_mass_kg", self.body_mass_kg),
            ("insulin_sensitivity", self.insulin_sensitivity),
            ("gut_absorption_rate", self.gut_absorption_rate),
            ("insulin_absorption_rate", self.insulin_absorption_rate),
            ("insulin_clearance_rate", self.insulin_clearance_rate),
            ("insulin_action_rate", self.insulin_action_rate),
            ("endogenous_glucose_production", self.endogenous_glucose_production),
            ("glucose_effectiveness", self.glucose_effectiveness),
            ("basal_equilibrium_u_per_h", self.basal_equilibrium_u_per_h),
            ("carb_ratio_g_per_u", self.carb_ratio_g_per_u),
            ("correction_factor_mg_dl_per_u", self.correction_factor_mg_dl_per_u),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.carb_bioavailability > 0.0 && self.carb_bioavailability <= 1.0) {
            return Err(Error::invalid("carb_bioavailability", "must lie in (0, 1]"));
        }
        if !(self.max_basal_u_per_h > self.basal_equilibrium_u_per_h) {
            return Err(Error::invalid(
                "max_basal_u_per_h",
                "must exceed basal_equilibrium_u_per_h",
            ));
        }
        Ok(())
    }

    pub fn insulin_volume_l(&self) -> f64 {
        INSULIN_VOLUME_L_PER_KG * self.body_mass_kg
    }

    pub fn glucose_volume_dl(&self) -> f64 {
        GLUCOSE_VOLUME_DL_PER_KG * self.body_mass_kg
    }

    /// Steady state reached under a constant basal rate with no meals.
    pub fn steady_state(&self, basal_u_per_h: f64) -> PatientState {
        let u = basal_u_per_h / 60.0;
        let depot = u / self.insulin_absorption_rate;
        let plasma_insulin = 1000.0 * u / (self.insulin_volume_l() * self.insulin_clearance_rate);
        let action = self.insulin_sensitivity * plasma_insulin;
        let glucose = self.endogenous_glucose_production / (self.glucose_effectiveness + action);
        PatientState {
            plasma_glucose: glucose,
            remote_insulin_action: action,
            plasma_insulin,
            sc_insulin_1: depot,
            sc_insulin_2: depot,
            gut_1: 0.0,
            gut_2: 0.0,
            clock: 0.0,
        }
    }

    pub fn equilibrium(&self) -> PatientState {
        self.steady_state(self.basal_equilibrium_u_per_h)
    }
}

/// Compartment contents of one patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientState {
    /// mg/dl
    pub plasma_glucose: f64,
    /// 1/min
    pub remote_insulin_action: f64,
    /// mU/l
    pub plasma_insulin: f64,
    /// U
    pub sc_insulin_1: f64,
    /// U
    pub sc_insulin_2: f64,
    /// g
    pub gut_1: f64,
    /// g
    pub gut_2: f64,
    /// minutes since episode start
    pub clock: f64,
}

impl PatientState {
    pub(crate) fn to_vector(self) -> [f64; 7] {
        [
            self.plasma_glucose,
            self.remote_insulin_action,
            self.plasma_insulin,
            self.sc_insulin_1,
            self.sc_insulin_2,
            self.gut_1,
            self.gut_2,
        ]
    }

    pub(crate) fn from_vector(v: [f64; 7], clock: f64) -> Self {
        PatientState {
            plasma_glucose: v[0],
            remote_insulin_action: v[1],
            plasma_insulin: v[2],
            sc_insulin_1: v[3],
            sc_insulin_2: v[4],
            gut_1: v[5],
            gut_2: v[6],
            clock,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite()) && self.clock.is_finite()
    }
}
