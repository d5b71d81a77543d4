use serde::{Deserialize, Serialize};

use super::log::{LogMetadata, LogRow, TrajectoryLog};
use crate::env::{featurize, normalize_action, FeatureVector, RawStep, FEATURE_DIM};
use crate::Result;

impl RawStep for LogRow {
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: FeatureVector,
    /// delivered basal mapped to `[-1, 1]`
    pub action: f64,
    pub reward: f64,
    pub next_state: FeatureVector,
    /// last transition of an episode, for whatever reason
    pub done: bool,
    /// glucose left the admissible range; no value beyond this transition
    pub terminal: bool,
}

/// Per-feature mean and population sd. Dimensions with (near) zero spread
/// keep sd 1 so they pass through centred but unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization { mean: vec![0.0; dim], sd: vec![1.0; dim] }
    }

    pub fn from_states<'a>(states: impl Iterator<Item = &'a FeatureVector>) -> Self {
        let mut n = 0usize;
        let mut mean = [0.0; FEATURE_DIM];
        let mut m2 = [0.0; FEATURE_DIM];
        for s in states {
            n += 1;
            for d in 0..FEATURE_DIM {
                let delta = s.0[d] - mean[d];
                mean[d] += delta / n as f64;
                m2[d] += delta * (s.0[d] - mean[d]);
            }
        }
        let sd = m2
            .iter()
            .map(|&v| {
                let sd = if n > 0 { (v / n as f64).sqrt() } else { 0.0 };
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Normalization { mean: mean.to_vec(), sd }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.sd) {
            *o = (v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub transitions: Vec<Transition>,
    pub normalization: Normalization,
    pub provenance: LogMetadata,
}

/// Recomputes features from the raw log one episode at a time, so no
/// transition ever pairs a state with the next episode's first state.
pub fn build_transitions(log: &TrajectoryLog) -> Result<OfflineDataset> {
    log.validate()?;
    let meta = &log.meta;
    let mut transitions = Vec::with_capacity(log.rows.len());
    for ep in log.episodes() {
        let mut state = featurize(&ep[..0], Some(&meta.padding), meta.control_period_minutes)?;
        for (t, row) in ep.iter().enumerate() {
            let next_state = featurize(&ep[..t + 1], Some(&meta.padding), meta.control_period_minutes)?;
            let out_of_range = row.true_glucose < meta.glucose_lower_mg_dl || row.true_glucose > meta.glucose_upper_mg_dl;
            transitions.push(Transition {
                state,
                action: normalize_action(row.basal, meta.max_basal_u_per_h),
                reward: row.reward,
                next_state,
                done: row.done,
                terminal: row.done && out_of_range,
            });
            state = next_state;
        }
    }
    let normalization = Normalization::from_states(transitions.iter().map(|t| &t.state));
    Ok(OfflineDataset { transitions, normalization, provenance: meta.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::log::tests::tiny_log;

    #[test]
    fn one_transition_per_row_with_rewards_passed_through() {
        let log = tiny_log();
        let ds = build_transitions(&log).unwrap();
        assert_eq!(ds.transitions.len(), log.rows.len());
        assert_eq!(ds.transitions.iter().filter(|t| t.done).count(), 2);
        assert!(ds.transitions.iter().all(|t| !t.terminal));
        for (t, r) in ds.transitions.iter().zip(&log.rows) {
            assert_eq!(t.reward, r.reward);
        }
        // the next episode starts from padding, not from the previous row
        assert_eq!(ds.transitions[3].state.0[0], log.meta.padding.cgm);
        assert_eq!(ds.transitions[1].state, ds.transitions[0].next_state);
    }

    #[test]
    fn normalization_of_constant_dimension() {
        let s = [FeatureVector([2.0; FEATURE_DIM]), FeatureVector([2.0; FEATURE_DIM])];
        let n = Normalization::from_states(s.iter());
        assert_eq!(n.mean, vec![2.0; FEATURE_DIM]);
        assert_eq!(n.sd, vec![1.0; FEATURE_DIM]);
    }
}
