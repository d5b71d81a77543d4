use crate::sim::{quantize_bolus, PatientParams, PumpConfig};

pub const BOLUS_TARGET_MG_DL: f64 = 144.0;
/// The correction term is enabled only when no carbohydrates were eaten in
/// this many steps before the current one.
pub const CORRECTION_LOOKBACK_STEPS: usize = 60;

/// Mealtime bolus: `carbs / CR`, plus `(g - 144) / CF` when no carbohydrates
/// were eaten in the preceding lookback window. Negative totals clamp to zero;
/// the result is floored onto the pump's bolus grid.
pub fn bolus_dose(
    params: &PatientParams,
    pump: &PumpConfig,
    announced_carbs: f64,
    g_t: f64,
    recent_carbs: f64,
) -> f64 {
    let mut dose = announced_carbs / params.carb_ratio_g_per_u;
    if recent_carbs == 0.0 {
        dose += (g_t - BOLUS_TARGET_MG_DL) / params.correction_factor_mg_dl_per_u;
    }
    quantize_bolus(pump, dose.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::builtin_cohort;

    fn patient(cr: f64, cf: f64) -> PatientParams {
        let mut p = builtin_cohort().patients[0].clone();
        p.carb_ratio_g_per_u = cr;
        p.correction_factor_mg_dl_per_u = cf;
        p
    }

    #[test]
    fn gate_closed_gives_carb_term_only() {
        let pump = PumpConfig::default();
        let d = bolus_dose(&patient(10.0, 20.0), &pump, 60.0, 300.0, 12.0);
        assert!((d - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gate_open_adds_correction() {
        let pump = PumpConfig::default();
        let d = bolus_dose(&patient(10.0, 20.0), &pump, 40.0, 244.0, 0.0);
        assert!((d - 9.0).abs() < 1e-12);
    }

    #[test]
    fn negative_total_clamps_to_zero() {
        let pump = PumpConfig::default();
        assert_eq!(bolus_dose(&patient(10.0, 20.0), &pump, 10.0, 44.0, 0.0), 0.0);
    }
}
