use rayon::prelude::*;

use super::metrics::{compute_metrics, GlycemicReport, RolloutTrace};
use crate::control::{PidController, PidParams};
use crate::env::{run_episode, BasalController, EnvConfig, GlucoseEnv};
use crate::rl::{Policy, PolicyController};
use crate::seeds::{derive_seed, label_hash};
use crate::sim::PatientParams;
use crate::Result;

/// Seed of the `k`-th test rollout for a given training seed.
pub fn test_seed(training_seed: u64, k: usize) -> u64 {
    derive_seed(training_seed, &[label_hash("test"), k as u64])
}

pub fn test_seeds(training_seed: u64, n: usize) -> Vec<u64> {
    (0..n).map(|k| test_seed(training_seed, k)).collect()
}

/// Evaluation announces carbohydrates without random error; a systematic
/// overestimate, if configured, is kept.
pub fn evaluation_env(base: &EnvConfig) -> EnvConfig {
    let mut env = base.clone();
    env.announcement.noise_sd = 0.0;
    env
}

/// One full episode from the patient's equilibrium.
pub fn rollout<C: BasalController>(patient: &PatientParams, env: &EnvConfig, seed: u64, controller: &mut C) -> Result<RolloutTrace> {
    let mut sim = GlucoseEnv::new(patient.clone(), env.clone(), seed, 0)?;
    run_episode(&mut sim, controller)?;
    let history = sim.into_history();
    Ok(RolloutTrace {
        patient_id: patient.id.clone(),
        age_group: patient.age_group,
        cgm: history.iter().map(|r| r.cgm).collect(),
        reward_sum: history.iter().map(|r| r.reward).sum(),
        failed: history.last().is_some_and(|r| r.terminal),
    })
}

pub fn policy_traces(policy: &Policy, patient: &PatientParams, env: &EnvConfig, seeds: &[u64]) -> Result<Vec<RolloutTrace>> {
    seeds
        .par_iter()
        .map(|&s| {
            let mut c = PolicyController::new(policy, patient.max_basal_u_per_h, env.pump)?;
            rollout(patient, env, s, &mut c)
        })
        .collect()
}

/// Noise-free PID rollouts.
pub fn pid_traces(pid: &PidParams, patient: &PatientParams, env: &EnvConfig, seeds: &[u64]) -> Result<Vec<RolloutTrace>> {
    seeds
        .par_iter()
        .map(|&s| {
            let g0 = patient.equilibrium().plasma_glucose;
            rollout(patient, env, s, &mut PidController::new(*pid, g0))
        })
        .collect()
}

pub fn evaluate_policy(policy: &Policy, patient: &PatientParams, env: &EnvConfig, seeds: &[u64]) -> Result<GlycemicReport> {
    compute_metrics(&policy_traces(policy, patient, env, seeds)?)
}

pub fn evaluate_pid(pid: &PidParams, patient: &PatientParams, env: &EnvConfig, seeds: &[u64]) -> Result<GlycemicReport> {
    compute_metrics(&pid_traces(pid, patient, env, seeds)?)
}
