//! Episodic environment binding the simulator, the bolus calculator, the
//! state features and the risk reward.

mod features;
mod reward;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use features::{featurize, FeatureVector, Padding, RawRecord, RawStep, ACTIVITY_WINDOW, FEATURE_DIM, GLUCOSE_HISTORY_LEN, GLUCOSE_HISTORY_SPACING};
pub use reward::{magni_risk, magni_risk_minimizer};
pub(crate) use reward::magni_risk_unchecked;

use crate::control::{bolus_dose, CORRECTION_LOOKBACK_STEPS};
use crate::seeds::{stream, SimRng};
use crate::sim::{
    builtin_meal_profiles, generate_meal_schedule, quantize_dose, step_physiology, CgmSensor, MealProfile, PatientParams,
    PatientState, PumpConfig, SensorConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub length_days: f64,
    pub control_period_minutes: f64,
    pub glucose_lower_mg_dl: f64,
    pub glucose_upper_mg_dl: f64,
    pub termination_penalty: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            length_days: 10.0,
            control_period_minutes: 3.0,
            glucose_lower_mg_dl: 10.0,
            glucose_upper_mg_dl: 1000.0,
            termination_penalty: -1e5,
        }
    }
}

impl EpisodeConfig {
    pub fn steps(&self) -> usize {
        (self.length_days * 1440.0 / self.control_period_minutes).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_days > 0.0) {
            return Err(Error::invalid("length_days", "must be > 0"));
        }
        if !(self.control_period_minutes > 0.0) {
            return Err(Error::invalid("control_period_minutes", "must be > 0"));
        }
        if !(self.glucose_lower_mg_dl < self.glucose_upper_mg_dl) {
            return Err(Error::invalid("glucose_bounds", "lower bound must be below upper bound"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MealSettings {
    pub profile: MealProfile,
    pub time_sd_minutes: f64,
    pub include_snacks: bool,
}

impl Default for MealSettings {
    fn default() -> Self {
        let profile = builtin_meal_profiles().remove("default").expect("default profile");
        MealSettings {
            time_sd_minutes: profile.meal_time_sd_minutes,
            profile,
            include_snacks: true,
        }
    }
}

/// How the patient's carbohydrate estimate departs from the truth:
/// `announced = true * (1 + overestimate) * max(0, N(1, noise_sd^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CarbAnnouncement {
    pub noise_sd: f64,
    pub overestimate: f64,
}

impl CarbAnnouncement {
    fn announce<R: Rng + ?Sized>(&self, carbs: f64, rng: &mut R) -> f64 {
        let mult = if self.noise_sd > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            (1.0 + self.noise_sd * z).max(0.0)
        } else {
            1.0
        };
        carbs * (1.0 + self.overestimate) * mult
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub episode: EpisodeConfig,
    pub sensor: SensorConfig,
    pub pump: PumpConfig,
    pub meals: MealSettings,
    pub announcement: CarbAnnouncement,
}

/// Maps a basal rate on `[0, max_basal]` to `[-1, 1]`.
pub fn normalize_action(basal_u_per_h: f64, max_basal_u_per_h: f64) -> f64 {
    2.0 * basal_u_per_h / max_basal_u_per_h - 1.0
}

/// Inverse of [`normalize_action`] followed by pump quantization.
pub fn denormalize_action(action: f64, max_basal_u_per_h: f64, pump: &PumpConfig) -> f64 {
    let a = if action.is_nan() { -1.0 } else { action.clamp(-1.0, 1.0) };
    quantize_dose(pump, (a + 1.0) / 2.0 * max_basal_u_per_h, max_basal_u_per_h)
}

/// What a controller sees before choosing the basal rate of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub features: FeatureVector,
    /// latest CGM reading
    pub cgm: f64,
    pub step: usize,
}

pub trait BasalController {
    /// Raw basal rate in U/h; the environment clamps and quantizes it.
    fn basal_rate(&mut self, obs: &Observation) -> f64;
}

/// Everything that happened during one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    /// glucose at the end of the step, mg/dl
    pub true_glucose: f64,
    /// CGM reading at the end of the step, mg/dl
    pub cgm: f64,
    /// delivered basal rate, U/h
    pub basal: f64,
    pub bolus: f64,
    pub true_carbs: f64,
    pub announced_carbs: f64,
    pub reward: f64,
    pub done: bool,
    /// glucose left the admissible range
    pub terminal: bool,
}

impl RawStep for StepRecord {
    fn cgm(&self) -> f64 {
        self.cgm
    }
    fn basal_u_per_h(&self) -> f64 {
        self.basal
    }
    fn bolus_u(&self) -> f64 {
        self.bolus
    }
    fn carbs_g(&self) -> f64 {
        self.true_carbs
    }
}

#[derive(Debug, Clone)]
pub struct GlucoseEnv {
    params: PatientParams,
    config: EnvConfig,
    state: PatientState,
    sensor: CgmSensor,
    sensor_rng: SimRng,
    meal_rng: SimRng,
    announce_rng: SimRng,
    carb_scale: f64,
    days_generated: usize,
    pending_meals: BTreeMap<usize, (f64, f64)>,
    history: Vec<StepRecord>,
    padding: Padding,
    last_cgm: f64,
    total_steps: usize,
    done: bool,
}

impl GlucoseEnv {
    /// Starts an episode at the patient's basal equilibrium. All randomness is
    /// drawn from streams derived from `(seed, episode)`.
    pub fn new(params: PatientParams, config: EnvConfig, seed: u64, episode: u64) -> Result<Self> {
        params.validate()?;
        config.episode.validate()?;
        let state = params.equilibrium();
        let padding = Padding {
            cgm: state.plasma_glucose,
            basal_u_per_h: params.basal_equilibrium_u_per_h,
        };
        let carb_scale = config.meals.profile.carb_scale(&params);
        Ok(GlucoseEnv {
            sensor: CgmSensor::new(config.sensor),
            sensor_rng: stream(seed, "sensor", &[episode]),
            meal_rng: stream(seed, "meals", &[episode]),
            announce_rng: stream(seed, "announce", &[episode]),
            carb_scale,
            days_generated: 0,
            pending_meals: BTreeMap::new(),
            history: Vec::with_capacity(config.episode.steps()),
            last_cgm: padding.cgm,
            padding,
            total_steps: config.episode.steps(),
            done: false,
            state,
            params,
            config,
        })
    }

    pub fn params(&self) -> &PatientParams {
        &self.params
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &PatientState {
        &self.state
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn into_history(self) -> Vec<StepRecord> {
        self.history
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observation(&self) -> Observation {
        let features = featurize(&self.history, Some(&self.padding), self.config.episode.control_period_minutes)
            .expect("padded featurization cannot fail");
        Observation {
            features,
            cgm: self.last_cgm,
            step: self.history.len(),
        }
    }

    fn ensure_meals_through(&mut self, step: usize) {
        let period = self.config.episode.control_period_minutes;
        let day = ((step as f64 * period) / 1440.0).floor() as usize;
        while self.days_generated <= day {
            let d = self.days_generated;
            let m = &self.config.meals;
            let events = generate_meal_schedule(&m.profile, m.time_sd_minutes, m.include_snacks, self.carb_scale, &mut self.meal_rng);
            for e in events {
                let announced = self.config.announcement.announce(e.carbs, &mut self.announce_rng);
                let minute = d as f64 * 1440.0 + e.time;
                let idx = (minute / period).floor() as usize;
                let slot = self.pending_meals.entry(idx).or_insert((0.0, 0.0));
                slot.0 += e.carbs;
                slot.1 += announced;
            }
            self.days_generated += 1;
        }
    }

    /// Advances one control period with the given basal rate (U/h, clamped
    /// and quantized by the pump).
    pub fn step_basal(&mut self, basal_u_per_h: f64) -> Result<StepRecord> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let t = self.history.len();
        self.ensure_meals_through(t);
        let (carbs, announced) = self.pending_meals.remove(&t).unwrap_or((0.0, 0.0));
        let basal = quantize_dose(&self.config.pump, basal_u_per_h, self.params.max_basal_u_per_h);
        let bolus = if announced > 0.0 {
            let recent: f64 = self.history.iter().rev().take(CORRECTION_LOOKBACK_STEPS).map(|r| r.true_carbs).sum();
            bolus_dose(&self.params, &self.config.pump, announced, self.last_cgm, recent)
        } else {
            0.0
        };
        let ep = &self.config.episode;
        self.state = step_physiology(&self.state, &self.params, basal, bolus, carbs, ep.control_period_minutes)?;
        let g = self.state.plasma_glucose;
        let cgm = self.sensor.read(g, &mut self.sensor_rng);
        let terminal = g < ep.glucose_lower_mg_dl || g > ep.glucose_upper_mg_dl;
        let mut reward = -magni_risk_unchecked(g);
        if terminal {
            reward += ep.termination_penalty;
        }
        let done = terminal || t + 1 >= self.total_steps;
        let rec = StepRecord {
            step_index: t,
            true_glucose: g,
            cgm,
            basal,
            bolus,
            true_carbs: carbs,
            announced_carbs: announced,
            reward,
            done,
            terminal,
        };
        self.history.push(rec);
        self.last_cgm = cgm;
        self.done = done;
        Ok(rec)
    }

    /// Step with a normalized action in `[-1, 1]`.
    pub fn step(&mut self, action: f64) -> Result<(FeatureVector, f64, bool)> {
        let basal = denormalize_action(action, self.params.max_basal_u_per_h, &self.config.pump);
        let rec = self.step_basal(basal)?;
        Ok((self.observation().features, rec.reward, rec.done))
    }
}

/// Runs one episode to completion under `controller`.
pub fn run_episode<C: BasalController + ?Sized>(env: &mut GlucoseEnv, controller: &mut C) -> Result<()> {
    while !env.is_done() {
        let obs = env.observation();
        let rate = controller.basal_rate(&obs);
        env.step_basal(rate)?;
    }
    Ok(())
}
