//! Virtual-patient glucose dynamics, CGM sensing, pump quantization and meal
//! scheduling.

mod cohort;
mod meals;
mod patient;
mod physiology;
mod pump;
mod sensor;

pub use cohort::{builtin_cohort, builtin_meal_profiles, load_cohort, load_meal_profiles, parse_cohort, parse_meal_profiles, render_cohort, Cohort};
pub use meals::{generate_meal_schedule, MealEvent, MealProfile, MealSlot};
pub use patient::{AgeGroup, PatientParams, PatientState, GLUCOSE_VOLUME_DL_PER_KG, INSULIN_VOLUME_L_PER_KG};
pub use physiology::{derivatives, step_physiology, step_physiology_with_substep, INTERNAL_SUBSTEP_MINUTES};
pub use pump::{quantize_bolus, quantize_dose, PumpConfig};
pub use sensor::{read_cgm, CgmSensor, SensorConfig};
