use serde::{Deserialize, Serialize};

use super::heads::{likely_bins, masked_argmax, softmax};
use super::policy::{Algorithm, Policy};
use super::training::{sample_indices, TrainingData, TrainingLog};
use super::DiscreteActionMap;
use crate::nn::{polyak_update, Activation, AdamConfig, AdamState, Loss, Matrix, Network};
use crate::seeds::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcqConfig {
    pub lr: f64,
    /// minimum behaviour likelihood, relative to the most likely bin, for a
    /// bin to be eligible
    pub threshold: f64,
    pub gamma: f64,
    /// polyak fraction applied every `target_update_period` steps; 1 gives
    /// periodic hard copies
    pub tau: f64,
    pub target_update_period: usize,
    pub batch_size: usize,
    pub gradient_steps: usize,
    pub hidden: Vec<usize>,
    pub checkpoints: usize,
}

impl Default for BcqConfig {
    fn default() -> Self {
        BcqConfig {
            lr: 3e-4,
            threshold: 0.3,
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

impl BcqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid("threshold", "must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", "must lie in (0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if self.target_update_period == 0 || self.batch_size == 0 || self.gradient_steps == 0 {
            return Err(Error::invalid("target_update_period/batch_size/gradient_steps", "must be positive"));
        }
        Ok(())
    }
}

/// Weight of the logit L2 penalty on the imitation head.
const LOGIT_PENALTY: f64 = 1e-2;

/// Discrete BCQ: a Q head trained on Huber TD error whose bootstrap action is
/// restricted to bins the imitation head deems likely, and an imitation head
/// trained by cross-entropy on dataset bins.
pub fn train_bcq_discrete(
    data: &TrainingData,
    config: &BcqConfig,
    map: &DiscreteActionMap,
    seed: u64,
) -> Result<(Policy, TrainingLog)> {
    config.validate()?;
    let d = data.state_dim;
    let n = map.n_bins;
    let mut q = Network::mlp(d, &config.hidden, n, Activation::Identity, &mut stream(seed, "bcq/q", &[]))?;
    let mut imitation = Network::mlp(d, &config.hidden, n, Activation::Identity, &mut stream(seed, "bcq/imitation", &[]))?;
    let mut q_target = q.clone();
    let mut q_adam = AdamState::new(&q, AdamConfig::with_lr(config.lr));
    let mut i_adam = AdamState::new(&imitation, AdamConfig::with_lr(config.lr));
    let mut batch_rng = stream(seed, "bcq/batch", &[]);
    let mut log = TrainingLog::default();
    let huber = Loss::Huber { delta: 1.0 };

    for step in 0..config.gradient_steps {
        let idx = sample_indices(&mut batch_rng, data.len(), config.batch_size);
        let batch = data.batch(&idx);
        let bsz = idx.len();
        let bins: Vec<usize> = batch.actions.iter().map(|&a| map.bin_of(a)).collect();

        let q_next = q.forward(&batch.next_states)?;
        let logits_next = imitation.forward(&batch.next_states)?;
        let q_next_target = q_target.forward(&batch.next_states)?;
        let mut y = Vec::with_capacity(bsz);
        for i in 0..bsz {
            let allowed = likely_bins(logits_next.row(i), config.threshold);
            let a_next = masked_argmax(q_next.row(i), |k| allowed[k]);
            y.push(batch.rewards[i] + batch.not_terminal[i] * config.gamma * q_next_target.get(i, a_next));
        }

        let (q_all, q_cache) = q.forward_cached(&batch.states)?;
        let q_taken = Matrix::column(&(0..bsz).map(|i| q_all.get(i, bins[i])).collect::<Vec<_>>());
        let (td_loss, td_grad) = huber.evaluate(&q_taken, &Matrix::column(&y))?;
        let mut up = Matrix::zeros(bsz, n);
        for i in 0..bsz {
            up.set(i, bins[i], td_grad.data[i]);
        }
        let (g, _) = q.backward(&q_cache, &up)?;
        q_adam.step(&mut q, &g)?;

        let (logits, i_cache) = imitation.forward_cached(&batch.states)?;
        let mut ce = 0.0;
        let mut reg = 0.0;
        let mut up = Matrix::zeros(bsz, n);
        let reg_scale = 2.0 * LOGIT_PENALTY / (bsz * n) as f64;
        for i in 0..bsz {
            let row = logits.row(i);
            let p = softmax(row);
            ce -= p[bins[i]].max(f64::MIN_POSITIVE).ln();
            for k in 0..n {
                reg += row[k] * row[k];
                let onehot = if k == bins[i] { 1.0 } else { 0.0 };
                up.set(i, k, (p[k] - onehot) / bsz as f64 + reg_scale * row[k]);
            }
        }
        let i_loss = ce / bsz as f64 + LOGIT_PENALTY * reg / (bsz * n) as f64;
        if !i_loss.is_finite() {
            return Err(Error::NonFiniteLoss { what: "bcq imitation".into(), step });
        }
        let (g, _) = imitation.backward(&i_cache, &up)?;
        i_adam.step(&mut imitation, &g)?;

        log.record(step, td_loss, "bcq q")?;
        if (step + 1) % config.target_update_period == 0 {
            polyak_update(&mut q_target, &q, config.tau)?;
        }
        if TrainingLog::checkpoint_due(step, config.gradient_steps, config.checkpoints) {
            let mean_q = q_taken.data.iter().sum::<f64>() / bsz as f64;
            log.push_checkpoint(step, None, mean_q);
        }
    }
    let policy = Policy::discrete(
        Algorithm::Bcq,
        q,
        Some(imitation),
        config.threshold,
        *map,
        data.normalization.clone(),
        data.reward_scale,
    );
    Ok((policy, log))
}
