use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PidController, PidParams, RankedPid};
use crate::env::{run_episode, EnvConfig, GlucoseEnv};
use crate::sim::PatientParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub kp_values: Vec<f64>,
    pub ki_values: Vec<f64>,
    pub kd_values: Vec<f64>,
    pub episode_days: f64,
    pub seed: u64,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

fn signed(mags: &[f64], with_zero: bool) -> Vec<f64> {
    let mut v: Vec<f64> = mags.iter().map(|m| -m).collect();
    if with_zero {
        v.push(0.0);
    }
    v.extend_from_slice(mags);
    v.sort_by(f64::total_cmp);
    v
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            kp_values: signed(&log_spaced(1e-4, 1e-1, 8), false),
            ki_values: signed(&[1e-7, 1e-6, 1e-5, 1e-4], true),
            kd_values: signed(&[1e-3, 1e-2, 1e-1, 1.0], true),
            episode_days: 10.0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn cardinality(&self) -> usize {
        self.kp_values.len() * self.ki_values.len() * self.kd_values.len()
    }

    pub fn points(&self, g_target: f64) -> Vec<PidParams> {
        let mut out = Vec::with_capacity(self.cardinality());
        for &kp in &self.kp_values {
            for &ki in &self.ki_values {
                for &kd in &self.kd_values {
                    out.push(PidParams { g_target, ..PidParams::new(kp, ki, kd) });
                }
            }
        }
        out
    }
}

/// Total reward of one PID on a seeded rollout.
pub fn pid_rollout_reward(params: &PidParams, patient: &PatientParams, env: &EnvConfig, seed: u64) -> Result<f64> {
    let mut env = GlucoseEnv::new(patient.clone(), env.clone(), seed, 0)?;
    let mut ctl = PidController::new(*params, env.observation().cgm);
    run_episode(&mut env, &mut ctl)?;
    Ok(env.history().iter().map(|r| r.reward).sum())
}

fn lexicographic(a: &PidParams, b: &PidParams) -> std::cmp::Ordering {
    a.kp.total_cmp(&b.kp)
        .then(a.ki.total_cmp(&b.ki))
        .then(a.kd.total_cmp(&b.kd))
}

/// Simulates every grid point on the same seeded rollout and ranks them by
/// total reward, best first. Ties go to the lexicographically smaller gains.
pub fn rank_pid_grid(grid: &GridSpec, patient: &PatientParams, env: &EnvConfig) -> Result<Vec<RankedPid>> {
    if grid.cardinality() == 0 {
        return Err(Error::EmptyGrid);
    }
    if !(grid.episode_days > 0.0) {
        return Err(Error::invalid("episode_days", "must be > 0"));
    }
    let mut env = env.clone();
    env.episode.length_days = grid.episode_days;
    let points = grid.points(144.0);
    let rewards: Vec<f64> = points
        .par_iter()
        .map(|p| pid_rollout_reward(p, patient, &env, grid.seed))
        .collect::<Result<_>>()?;
    let mut scored: Vec<(PidParams, f64)> = points.into_iter().zip(rewards).collect();
    scored.sort_by(|(pa, ra), (pb, rb)| rb.total_cmp(ra).then_with(|| lexicographic(pa, pb)));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (params, total_reward))| RankedPid { rank: i + 1, total_reward, params })
        .collect())
}

/// Returns the `rank`-th best grid point (1 = tuned).
pub fn tune_pid(grid: &GridSpec, patient: &PatientParams, env: &EnvConfig, rank: usize) -> Result<RankedPid> {
    if grid.cardinality() == 0 {
        return Err(Error::EmptyGrid);
    }
    if rank == 0 || rank > grid.cardinality() {
        return Err(Error::invalid("rank", format!("must lie in 1..={}", grid.cardinality())));
    }
    Ok(rank_pid_grid(grid, patient, env)?[rank - 1])
}
