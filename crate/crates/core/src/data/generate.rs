use serde::{Deserialize, Serialize};

use super::log::{LogMetadata, LogRow, TrajectoryLog, LOG_FORMAT_VERSION};
use crate::control::{OuParams, PidController, PidParams};
use crate::env::{BasalController, EnvConfig, GlucoseEnv};
use crate::seeds::stream;
use crate::sim::PatientParams;
use crate::{Error, Result};

/// Exploration settings of a demonstrator rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub n_samples: usize,
    pub ou: OuParams,
    /// sd of the multiplicative error on announced carbohydrates
    pub carb_noise_sd: f64,
    pub seed: u64,
}

impl GenerationSpec {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        GenerationSpec { n_samples, ou: OuParams::default(), carb_noise_sd: 0.1, seed }
    }
}

/// Runs consecutive episodes of the noisy PID demonstrator until exactly
/// `n_samples` control steps are logged. The last episode is cut short with
/// `done` on its final row. Episode `k` draws its meals, sensor noise,
/// carbohydrate estimates and OU noise from streams keyed by `(seed, k)`.
pub fn generate_dataset(
    patient: &PatientParams,
    env: &EnvConfig,
    demonstrator: &PidParams,
    spec: &GenerationSpec,
) -> Result<TrajectoryLog> {
    if spec.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be positive"));
    }
    if !(spec.carb_noise_sd >= 0.0) {
        return Err(Error::invalid("carb_noise_sd", "must be >= 0"));
    }
    let mut config = env.clone();
    config.announcement.noise_sd = spec.carb_noise_sd;
    let mut rows = Vec::with_capacity(spec.n_samples);
    let mut episode = 0u64;
    let mut padding = None;
    while rows.len() < spec.n_samples {
        let mut sim = GlucoseEnv::new(patient.clone(), config.clone(), spec.seed, episode)?;
        padding.get_or_insert(sim.padding());
        let mut pid = PidController::new(*demonstrator, sim.padding().cgm)
            .with_noise(spec.ou, stream(spec.seed, "ou", &[episode]));
        while !sim.is_done() && rows.len() < spec.n_samples {
            let obs = sim.observation();
            let rate = pid.basal_rate(&obs);
            let rec = sim.step_basal(rate)?;
            rows.push(LogRow {
                step_index: rec.step_index,
                episode_id: episode,
                patient_id: patient.id.clone(),
                seed: spec.seed,
                true_glucose: rec.true_glucose,
                cgm: rec.cgm,
                basal: rec.basal,
                bolus: rec.bolus,
                true_carbs: rec.true_carbs,
                announced_carbs: rec.announced_carbs,
                reward: rec.reward,
                done: rec.done || rows.len() + 1 == spec.n_samples,
            });
        }
        episode += 1;
    }
    let ep = &config.episode;
    Ok(TrajectoryLog {
        meta: LogMetadata {
            format_version: LOG_FORMAT_VERSION,
            patient_id: patient.id.clone(),
            seed: spec.seed,
            n_samples: spec.n_samples,
            episode_steps: ep.steps(),
            control_period_minutes: ep.control_period_minutes,
            glucose_lower_mg_dl: ep.glucose_lower_mg_dl,
            glucose_upper_mg_dl: ep.glucose_upper_mg_dl,
            max_basal_u_per_h: patient.max_basal_u_per_h,
            padding: padding.expect("at least one episode"),
            demonstrator: *demonstrator,
            ou: spec.ou,
            carb_noise_sd: spec.carb_noise_sd,
            bolus_overestimate: config.announcement.overestimate,
            meal_time_sd_minutes: config.meals.time_sd_minutes,
            rows_sha256: String::new(),
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::run_episode;
    use crate::sim::builtin_cohort;

    fn short_env() -> EnvConfig {
        let mut env = EnvConfig::default();
        env.episode.length_days = 1.0;
        env
    }

    #[test]
    fn exact_sample_count_and_truncation() {
        let p = builtin_cohort().get("adult#001").unwrap().clone();
        let spec = GenerationSpec::new(1000, 3);
        let log = generate_dataset(&p, &short_env(), &PidParams::new(-1e-3, 0.0, 0.0), &spec).unwrap();
        assert_eq!(log.rows.len(), 1000);
        log.validate().unwrap();
        let episodes: Vec<usize> = log.episodes().map(|e| e.len()).collect();
        assert_eq!(episodes, vec![480, 480, 40]);
    }

    #[test]
    fn zero_noise_matches_plain_pid() {
        let p = builtin_cohort().get("adult#002").unwrap().clone();
        let pid = PidParams::new(-2e-3, -1e-6, 0.0);
        let env = short_env();
        let spec = GenerationSpec { n_samples: 480, ou: OuParams { sigma: 0.0, ..Default::default() }, carb_noise_sd: 0.0, seed: 8 };
        let log = generate_dataset(&p, &env, &pid, &spec).unwrap();
        let mut sim = GlucoseEnv::new(p, env, 8, 0).unwrap();
        let mut plain = PidController::new(pid, sim.padding().cgm);
        run_episode(&mut sim, &mut plain).unwrap();
        for (row, rec) in log.rows.iter().zip(sim.history()) {
            assert_eq!(row.basal, rec.basal);
            assert_eq!(row.true_glucose, rec.true_glucose);
            assert_eq!(row.announced_carbs, rec.true_carbs);
        }
    }
}
