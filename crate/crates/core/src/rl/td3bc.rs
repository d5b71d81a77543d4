use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::policy::{Algorithm, Policy};
use super::training::{sample_indices, Batch, TrainingData, TrainingLog};
use crate::nn::{polyak_update, Activation, AdamConfig, AdamState, Loss, Matrix, Network};
use crate::seeds::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3BcConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// behavioural-cloning regularization scale
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    /// target policy smoothing noise sd, normalized action units
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    pub batch_size: usize,
    pub gradient_steps: usize,
    pub hidden: Vec<usize>,
    pub checkpoints: usize,
    /// trailing fraction of the data kept out of training to track critic loss
    pub holdout_fraction: f64,
}

impl Default for Td3BcConfig {
    fn default() -> Self {
        Td3BcConfig {
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha: 2.5,
            gamma: 0.99,
            tau: 0.005,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            batch_size: 256,
            gradient_steps: 100_000,
            hidden: vec![256, 256],
            checkpoints: 10,
            holdout_fraction: 0.0,
        }
    }
}

impl Td3BcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be > 0"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", "must lie in (0, 1]"));
        }
        if self.policy_delay == 0 {
            return Err(Error::invalid("policy_delay", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.gradient_steps == 0 {
            return Err(Error::invalid("batch_size/gradient_steps", "must be positive"));
        }
        if !(self.policy_noise >= 0.0 && self.noise_clip >= 0.0) {
            return Err(Error::invalid("policy_noise/noise_clip", "must be >= 0"));
        }
        Ok(())
    }
}

struct Critic {
    net: Network,
    target: Network,
    adam: AdamState,
}

fn state_action(states: &Matrix, actions: &[f64]) -> Matrix {
    states.hstack(&Matrix::column(actions))
}

fn critic_targets(
    data_gamma: f64,
    batch: &Batch,
    actor_target: &Network,
    critics: &[Critic; 2],
    noise: &[f64],
) -> Result<Vec<f64>> {
    let mut next_actions = actor_target.forward(&batch.next_states)?.data;
    for (a, n) in next_actions.iter_mut().zip(noise) {
        *a = (*a + n).clamp(-1.0, 1.0);
    }
    let x = state_action(&batch.next_states, &next_actions);
    let q1 = critics[0].target.forward(&x)?.data;
    let q2 = critics[1].target.forward(&x)?.data;
    Ok((0..batch.rewards.len())
        .map(|i| batch.rewards[i] + batch.not_terminal[i] * data_gamma * q1[i].min(q2[i]))
        .collect())
}

/// TD3 with a behavioural-cloning term: twin critics with clipped double-Q
/// targets and target policy smoothing; a delayed deterministic actor
/// minimizing `-lambda * mean Q(s, pi(s)) + mean (pi(s) - a)^2` with
/// `lambda = alpha / mean |Q|`.
pub fn train_td3bc(data: &TrainingData, config: &Td3BcConfig, seed: u64) -> Result<(Policy, TrainingLog)> {
    config.validate()?;
    let (train, holdout) = if config.holdout_fraction > 0.0 {
        let (a, b) = data.split_holdout(config.holdout_fraction)?;
        (a, Some(b))
    } else {
        (data.clone(), None)
    };
    let d = train.state_dim;
    let mut actor = Network::mlp(d, &config.hidden, 1, Activation::Tanh, &mut stream(seed, "td3bc/actor", &[]))?;
    let mut actor_target = actor.clone();
    let mut actor_adam = AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr));
    let mut critics = [0u64, 1].map(|k| {
        let net = Network::mlp(d + 1, &config.hidden, 1, Activation::Identity, &mut stream(seed, "td3bc/critic", &[k]))
            .expect("validated widths");
        Critic { target: net.clone(), adam: AdamState::new(&net, AdamConfig::with_lr(config.critic_lr)), net }
    });
    let mut batch_rng = stream(seed, "td3bc/batch", &[]);
    let mut noise_rng = stream(seed, "td3bc/noise", &[]);
    let noise_dist = Normal::new(0.0, config.policy_noise).map_err(|e| Error::invalid("policy_noise", e.to_string()))?;
    let mut log = TrainingLog::default();
    let mut mean_q = 0.0;

    for step in 0..config.gradient_steps {
        let idx = sample_indices(&mut batch_rng, train.len(), config.batch_size);
        let batch = train.batch(&idx);
        let b = idx.len() as f64;
        let noise: Vec<f64> = (0..idx.len())
            .map(|_| noise_dist.sample(&mut noise_rng).clamp(-config.noise_clip, config.noise_clip))
            .collect();
        let y = Matrix::column(&critic_targets(config.gamma, &batch, &actor_target, &critics, &noise)?);
        let x = state_action(&batch.states, &batch.actions);
        let mut critic_loss = 0.0;
        for (k, c) in critics.iter_mut().enumerate() {
            let (q, cache) = c.net.forward_cached(&x)?;
            if k == 0 {
                mean_q = q.data.iter().sum::<f64>() / b;
            }
            let (loss, up) = Loss::Mse.evaluate(&q, &y)?;
            critic_loss += loss;
            let (g, _) = c.net.backward(&cache, &up)?;
            c.adam.step(&mut c.net, &g)?;
        }
        log.record(step, critic_loss, "td3bc critic")?;

        if (step + 1) % config.policy_delay == 0 {
            let (pi, actor_cache) = actor.forward_cached(&batch.states)?;
            let xs = state_action(&batch.states, &pi.data);
            let (q, critic_cache) = critics[0].net.forward_cached(&xs)?;
            let mean_abs_q = q.data.iter().map(|v| v.abs()).sum::<f64>() / b;
            let lambda = config.alpha / mean_abs_q.max(1e-12);
            let actor_loss = -lambda * q.data.iter().sum::<f64>() / b
                + pi.data.iter().zip(&batch.actions).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / b;
            if !actor_loss.is_finite() {
                return Err(Error::NonFiniteLoss { what: "td3bc actor".into(), step });
            }
            let dq = Matrix::from_vec(idx.len(), 1, vec![-lambda / b; idx.len()]);
            let dx = critics[0].net.input_gradient(&critic_cache, &dq)?;
            let dpi: Vec<f64> = (0..idx.len())
                .map(|i| dx.get(i, d) + 2.0 * (pi.data[i] - batch.actions[i]) / b)
                .collect();
            let (g, _) = actor.backward(&actor_cache, &Matrix::column(&dpi))?;
            actor_adam.step(&mut actor, &g)?;
            for c in critics.iter_mut() {
                polyak_update(&mut c.target, &c.net, config.tau)?;
            }
            polyak_update(&mut actor_target, &actor, config.tau)?;
        }

        if TrainingLog::checkpoint_due(step, config.gradient_steps, config.checkpoints) {
            let holdout_loss = match &holdout {
                Some(h) => Some(holdout_critic_loss(h, config.gamma, &actor_target, &critics)?),
                None => None,
            };
            log.push_checkpoint(step, holdout_loss, mean_q);
        }
    }
    let policy = Policy::continuous(Algorithm::Td3Bc, actor, data.normalization.clone(), data.reward_scale);
    Ok((policy, log))
}

/// Mean squared TD error of the first critic on held-out transitions, with
/// noise-free target actions.
fn holdout_critic_loss(h: &TrainingData, gamma: f64, actor_target: &Network, critics: &[Critic; 2]) -> Result<f64> {
    let idx: Vec<usize> = (0..h.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(4096) {
        let batch = h.batch(chunk);
        let y = critic_targets(gamma, &batch, actor_target, critics, &vec![0.0; chunk.len()])?;
        let q = critics[0].net.forward(&state_action(&batch.states, &batch.actions))?;
        total += q.data.iter().zip(&y).map(|(q, y)| (q - y) * (q - y)).sum::<f64>();
    }
    Ok(total / h.len() as f64)
}
