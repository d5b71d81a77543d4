use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Normalization, OfflineDataset};
use crate::env::FEATURE_DIM;
use crate::nn::Matrix;
use crate::{Error, Result};

/// Rewards are multiplied by this before training.
pub const DEFAULT_REWARD_SCALE: f64 = 0.1;

/// Transitions in the form the learners consume: normalized states, scaled
/// rewards, and a bootstrap mask that is zero only after glucose left the
/// admissible range (time-limit cuts still bootstrap).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub state_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub terminal: Vec<bool>,
    pub normalization: Normalization,
    pub reward_scale: f64,
}

/// A sampled minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    /// 0 where the transition is terminal, 1 otherwise
    pub not_terminal: Vec<f64>,
}

impl TrainingData {
    pub fn from_dataset(ds: &OfflineDataset, reward_scale: f64) -> Result<Self> {
        if ds.transitions.is_empty() {
            return Err(Error::invalid("dataset", "no transitions"));
        }
        if !(reward_scale > 0.0 && reward_scale.is_finite()) {
            return Err(Error::invalid("reward_scale", "must be positive"));
        }
        let n = ds.transitions.len();
        let norm = &ds.normalization;
        let mut states = vec![0.0; n * FEATURE_DIM];
        let mut next_states = vec![0.0; n * FEATURE_DIM];
        for (i, t) in ds.transitions.iter().enumerate() {
            norm.apply(&t.state.0, &mut states[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
            norm.apply(&t.next_state.0, &mut next_states[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
        }
        Ok(TrainingData {
            state_dim: FEATURE_DIM,
            states,
            actions: ds.transitions.iter().map(|t| t.action).collect(),
            rewards: ds.transitions.iter().map(|t| t.reward * reward_scale).collect(),
            next_states,
            terminal: ds.transitions.iter().map(|t| t.terminal).collect(),
            normalization: norm.clone(),
            reward_scale,
        })
    }

    /// Already-encoded transitions with identity normalization and unit
    /// reward scale.
    pub fn from_raw(
        state_dim: usize,
        states: Vec<f64>,
        actions: Vec<f64>,
        rewards: Vec<f64>,
        next_states: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let n = actions.len();
        if n == 0 || state_dim == 0 {
            return Err(Error::invalid("dataset", "no transitions"));
        }
        for (len, what) in [(states.len(), n * state_dim), (next_states.len(), n * state_dim), (rewards.len(), n), (terminal.len(), n)] {
            if len != what {
                return Err(Error::DimensionMismatch { expected: what, got: len });
            }
        }
        if actions.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::invalid("actions", "must lie in [-1, 1]"));
        }
        Ok(TrainingData {
            state_dim,
            states,
            actions,
            rewards,
            next_states,
            terminal,
            normalization: Normalization::identity(state_dim),
            reward_scale: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        let d = self.state_dim;
        let mut states = Vec::with_capacity(idx.len() * d);
        let mut next_states = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            next_states.extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
        }
        Batch {
            states: Matrix::from_vec(idx.len(), d, states),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states: Matrix::from_vec(idx.len(), d, next_states),
            not_terminal: idx.iter().map(|&i| if self.terminal[i] { 0.0 } else { 1.0 }).collect(),
        }
    }

    /// Splits off the trailing `fraction` of transitions.
    pub fn split_holdout(&self, fraction: f64) -> Result<(TrainingData, TrainingData)> {
        if !(0.0 < fraction && fraction < 1.0) {
            return Err(Error::invalid("holdout_fraction", "must lie in (0, 1)"));
        }
        let n = self.len();
        let cut = ((n as f64) * (1.0 - fraction)).round() as usize;
        if cut == 0 || cut == n {
            return Err(Error::invalid("holdout_fraction", "leaves one side empty"));
        }
        let d = self.state_dim;
        let part = |lo: usize, hi: usize| TrainingData {
            state_dim: d,
            states: self.states[lo * d..hi * d].to_vec(),
            actions: self.actions[lo..hi].to_vec(),
            rewards: self.rewards[lo..hi].to_vec(),
            next_states: self.next_states[lo * d..hi * d].to_vec(),
            terminal: self.terminal[lo..hi].to_vec(),
            normalization: self.normalization.clone(),
            reward_scale: self.reward_scale,
        };
        Ok((part(0, cut), part(cut, n)))
    }
}

/// Uniform sampling with replacement.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, batch: usize) -> Vec<usize> {
    (0..batch).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    /// mean training loss since the previous checkpoint
    pub train_loss: f64,
    pub holdout_loss: Option<f64>,
    /// mean Q at dataset actions over the last batch
    pub mean_q: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// value-fitting loss of every gradient step
    pub step_losses: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainingLog {
    pub(crate) fn record(&mut self, step: usize, loss: f64, what: &str) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { what: what.into(), step });
        }
        self.step_losses.push(loss);
        Ok(())
    }

    pub(crate) fn checkpoint_due(step: usize, total: usize, count: usize) -> bool {
        count > 0 && (step + 1) * count / total != step * count / total
    }

    pub(crate) fn push_checkpoint(&mut self, step: usize, holdout_loss: Option<f64>, mean_q: f64) {
        let from = self.checkpoints.last().map_or(0, |c| c.step + 1);
        let slice = &self.step_losses[from.min(self.step_losses.len())..];
        let train_loss = slice.iter().sum::<f64>() / slice.len().max(1) as f64;
        self.checkpoints.push(Checkpoint { step, train_loss, holdout_loss, mean_q });
    }
}
