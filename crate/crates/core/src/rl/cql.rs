use serde::{Deserialize, Serialize};

use super::heads::{logsumexp, softmax};
use super::policy::{Algorithm, Policy};
use super::training::{sample_indices, TrainingData, TrainingLog};
use super::DiscreteActionMap;
use crate::nn::{polyak_update, Activation, AdamConfig, AdamState, Loss, Matrix, Network};
use crate::seeds::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqlConfig {
    pub lr: f64,
    /// weight of the conservative regularizer
    pub cql_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub target_update_period: usize,
    pub batch_size: usize,
    pub gradient_steps: usize,
    pub hidden: Vec<usize>,
    pub checkpoints: usize,
}

impl Default for CqlConfig {
    fn default() -> Self {
        CqlConfig {
            lr: 3e-4,
            cql_alpha: 1.0,
            gamma: 0.99,
            tau: 0.005,
            target_update_period: 1,
            batch_size: 256,
            gradient_steps: 100_000,
            hidden: vec![256, 256],
            checkpoints: 10,
        }
    }
}

impl CqlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cql_alpha >= 0.0) {
            return Err(Error::invalid("cql_alpha", "must be >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", "must lie in (0, 1]"));
        }
        if self.target_update_period == 0 || self.batch_size == 0 || self.gradient_steps == 0 {
            return Err(Error::invalid("target_update_period/batch_size/gradient_steps", "must be positive"));
        }
        Ok(())
    }
}

/// Q-learning over action bins with Huber TD loss plus
/// `cql_alpha * mean(logsumexp_a Q(s, a) - Q(s, a_data))`. The recorded step
/// loss is the TD part alone.
pub fn train_cql_discrete(
    data: &TrainingData,
    config: &CqlConfig,
    map: &DiscreteActionMap,
    seed: u64,
) -> Result<(Policy, TrainingLog)> {
    config.validate()?;
    let d = data.state_dim;
    let n = map.n_bins;
    let mut q = Network::mlp(d, &config.hidden, n, Activation::Identity, &mut stream(seed, "cql/q", &[]))?;
    let mut q_target = q.clone();
    let mut adam = AdamState::new(&q, AdamConfig::with_lr(config.lr));
    let mut batch_rng = stream(seed, "cql/batch", &[]);
    let mut log = TrainingLog::default();
    let huber = Loss::Huber { delta: 1.0 };

    for step in 0..config.gradient_steps {
        let idx = sample_indices(&mut batch_rng, data.len(), config.batch_size);
        let batch = data.batch(&idx);
        let bsz = idx.len();
        let bins: Vec<usize> = batch.actions.iter().map(|&a| map.bin_of(a)).collect();

        let q_next = q_target.forward(&batch.next_states)?;
        let y: Vec<f64> = (0..bsz)
            .map(|i| {
                let best = q_next.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                batch.rewards[i] + batch.not_terminal[i] * config.gamma * best
            })
            .collect();

        let (q_all, cache) = q.forward_cached(&batch.states)?;
        let q_taken = Matrix::column(&(0..bsz).map(|i| q_all.get(i, bins[i])).collect::<Vec<_>>());
        let (td_loss, td_grad) = huber.evaluate(&q_taken, &Matrix::column(&y))?;
        let mut up = Matrix::zeros(bsz, n);
        let mut conservative = 0.0;
        for i in 0..bsz {
            up.set(i, bins[i], td_grad.data[i]);
            if config.cql_alpha > 0.0 {
                let row = q_all.row(i);
                conservative += logsumexp(row) - row[bins[i]];
                let p = softmax(row);
                let scale = config.cql_alpha / bsz as f64;
                for (k, pk) in p.iter().enumerate() {
                    let onehot = if k == bins[i] { 1.0 } else { 0.0 };
                    up.set(i, k, up.get(i, k) + scale * (pk - onehot));
                }
            }
        }
        if !(td_loss + conservative).is_finite() {
            return Err(Error::NonFiniteLoss { what: "cql".into(), step });
        }
        let (g, _) = q.backward(&cache, &up)?;
        adam.step(&mut q, &g)?;

        log.record(step, td_loss, "cql td")?;
        if (step + 1) % config.target_update_period == 0 {
            polyak_update(&mut q_target, &q, config.tau)?;
        }
        if TrainingLog::checkpoint_due(step, config.gradient_steps, config.checkpoints) {
            let mean_q = q_taken.data.iter().sum::<f64>() / bsz as f64;
            log.push_checkpoint(step, None, mean_q);
        }
    }
    let policy = Policy::discrete(Algorithm::Cql, q, None, 0.0, *map, data.normalization.clone(), data.reward_scale);
    Ok((policy, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_shift_identity() {
        let x = [1.0, -2.0, 0.5, 3.0];
        for c in [-1e3, -7.5, 0.0, 42.0, 1e3] {
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let diff = logsumexp(&shifted) - logsumexp(&x);
            assert!((diff - c).abs() <= 1e-12 * c.abs().max(1.0), "c={c}");
        }
        assert!(logsumexp(&[1000.0, 1000.0]).is_finite());
    }
}
