use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AgeGroup, PatientParams};

pub const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealEvent {
    /// minutes of day
    pub time: f64,
    pub carbs: f64,
    pub is_snack: bool,
    /// estimate handed to the bolus calculator
    pub announced_carbs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealSlot {
    pub mean_time_minutes: f64,
    pub mean_carbs_g: f64,
    pub carbs_sd_g: f64,
    #[serde(default)]
    pub snack: bool,
}

/// Daily meal pattern for an adult of `reference_body_mass_kg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealProfile {
    pub name: String,
    pub meal_time_sd_minutes: f64,
    pub reference_body_mass_kg: f64,
    pub slots: Vec<MealSlot>,
}

impl MealProfile {
    /// Carbohydrate multiplier for a patient: adults eat the reference
    /// amounts, other groups scale with body mass.
    pub fn carb_scale(&self, patient: &PatientParams) -> f64 {
        match patient.age_group {
            AgeGroup::Adult => 1.0,
            _ => patient.body_mass_kg / self.reference_body_mass_kg,
        }
    }
}

fn sample_time<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    for _ in 0..1000 {
        let z: f64 = rng.sample(StandardNormal);
        let t = mean + sd * z;
        if (0.0..MINUTES_PER_DAY).contains(&t) {
            return t;
        }
    }
    mean.clamp(0.0, MINUTES_PER_DAY - 1e-6)
}

/// Draws one day of meals. Times are normal around the slot means and
/// truncated to the day; amounts are normal and truncated at zero.
pub fn generate_meal_schedule<R: Rng + ?Sized>(
    profile: &MealProfile,
    time_sd_minutes: f64,
    include_snacks: bool,
    carb_scale: f64,
    rng: &mut R,
) -> Vec<MealEvent> {
    let mut events: Vec<MealEvent> = profile
        .slots
        .iter()
        .filter(|s| include_snacks || !s.snack)
        .map(|slot| {
            let time = sample_time(slot.mean_time_minutes, time_sd_minutes.max(0.0), rng);
            let z: f64 = rng.sample(StandardNormal);
            let carbs = (carb_scale * (slot.mean_carbs_g + slot.carbs_sd_g * z)).max(0.0);
            MealEvent {
                time,
                carbs,
                is_snack: slot.snack,
                announced_carbs: carbs,
            }
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}
