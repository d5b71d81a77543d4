use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MealProfile, PatientParams};
use crate::{fsutil, Error, Result};

pub const COHORT_FORMAT_VERSION: u32 = 1;

const BUILTIN_COHORT: &str = include_str!("../../resources/cohort.toml");
const BUILTIN_MEALS: &str = include_str!("../../resources/meals.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub format_version: u32,
    #[serde(rename = "patient")]
    pub patients: Vec<PatientParams>,
}

impl Cohort {
    pub fn get(&self, id: &str) -> Result<&PatientParams> {
        self.patients
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::Config(format!("unknown patient id `{id}`")))
    }
}

pub fn parse_cohort(text: &str) -> Result<Cohort> {
    let cohort: Cohort = toml::from_str(text).map_err(|e| Error::Format(format!("cohort: {e}")))?;
    if cohort.format_version != COHORT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: COHORT_FORMAT_VERSION,
            found: cohort.format_version,
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in &cohort.patients {
        p.validate()?;
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Format(format!("duplicate patient id `{}`", p.id)));
        }
    }
    Ok(cohort)
}

pub fn render_cohort(cohort: &Cohort) -> String {
    toml::to_string(cohort).expect("cohort serializes")
}

pub fn load_cohort(path: &Path) -> Result<Cohort> {
    let bytes = fsutil::read(path)?;
    parse_cohort(&String::from_utf8_lossy(&bytes))
}

pub fn builtin_cohort() -> Cohort {
    parse_cohort(BUILTIN_COHORT).expect("shipped cohort is valid")
}

#[derive(Deserialize)]
struct MealFile {
    format_version: u32,
    profile: Vec<MealProfile>,
}

pub fn parse_meal_profiles(text: &str) -> Result<BTreeMap<String, MealProfile>> {
    let file: MealFile = toml::from_str(text).map_err(|e| Error::Format(format!("meal profiles: {e}")))?;
    if file.format_version != COHORT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: COHORT_FORMAT_VERSION,
            found: file.format_version,
        });
    }
    let mut out = BTreeMap::new();
    for p in file.profile {
        if p.slots.iter().any(|s| s.mean_carbs_g < 0.0 || s.carbs_sd_g < 0.0 || !(0.0..1440.0).contains(&s.mean_time_minutes)) {
            return Err(Error::Format(format!("meal profile `{}` has an invalid slot", p.name)));
        }
        out.insert(p.name.clone(), p);
    }
    Ok(out)
}

pub fn load_meal_profiles(path: &Path) -> Result<BTreeMap<String, MealProfile>> {
    let bytes = fsutil::read(path)?;
    parse_meal_profiles(&String::from_utf8_lossy(&bytes))
}

pub fn builtin_meal_profiles() -> BTreeMap<String, MealProfile> {
    parse_meal_profiles(BUILTIN_MEALS).expect("shipped meal profiles are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AgeGroup;

    #[test]
    fn shipped_cohort_has_three_per_group() {
        let c = builtin_cohort();
        assert_eq!(c.patients.len(), 9);
        for g in [AgeGroup::Adult, AgeGroup::Adolescent, AgeGroup::Child] {
            assert_eq!(c.patients.iter().filter(|p| p.age_group == g).count(), 3);
        }
    }

    #[test]
    fn cohort_round_trips_through_text() {
        let c = builtin_cohort();
        assert_eq!(parse_cohort(&render_cohort(&c)).unwrap(), c);
    }

    #[test]
    fn rejects_bad_version_and_invalid_params() {
        let c = builtin_cohort();
        let text = render_cohort(&c).replace("format_version = 1", "format_version = 9");
        assert!(matches!(parse_cohort(&text), Err(Error::VersionMismatch { .. })));
        let mut bad = c.clone();
        bad.patients[0].max_basal_u_per_h = 0.1;
        assert!(parse_cohort(&render_cohort(&bad)).is_err());
    }
}
