//! Two-state MDP with an exact value-iteration solution.

use glucolab::rl::{BcqConfig, CqlConfig, DiscreteActionMap, Policy, Td3BcConfig, TrainingData};
use glucolab::seeds::stream;
use rand::Rng;

pub const GAMMA: f64 = 0.9;
/// Normalized actions standing for the two MDP actions: stay and switch.
pub const BIN_STAY: usize = 4;
pub const BIN_SWITCH: usize = 11;

pub fn map() -> DiscreteActionMap {
    DiscreteActionMap::default()
}

/// Deterministic dynamics: action 0 stays, action 1 switches state.
pub fn next_state(s: usize, a: usize) -> usize {
    if a == 0 {
        s
    } else {
        1 - s
    }
}

pub fn reward(s: usize, a: usize, shift: f64) -> f64 {
    [[0.0, -1.0], [1.0, 0.0]][s][a] + shift
}

pub fn value_iteration(shift: f64) -> [[f64; 2]; 2] {
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..2000 {
        let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        let mut next = [[0.0; 2]; 2];
        for s in 0..2 {
            for a in 0..2 {
                next[s][a] = reward(s, a, shift) + GAMMA * v[next_state(s, a)];
            }
        }
        q = next;
    }
    q
}

pub fn optimal_actions(shift: f64) -> [usize; 2] {
    let q = value_iteration(shift);
    [0, 1].map(|s| if q[s][1] > q[s][0] { 1 } else { 0 })
}

pub fn one_hot(s: usize) -> [f64; 2] {
    if s == 0 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

/// Uniformly random (state, action) pairs: full coverage of both actions.
pub fn mdp_dataset(n: usize, seed: u64, reward_scale: f64, shift: f64) -> TrainingData {
    let mut rng = stream(seed, "mdp", &[]);
    let (mut states, mut actions, mut rewards, mut next) = (vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let s = rng.gen_range(0..2usize);
        let a = rng.gen_range(0..2usize);
        states.extend(one_hot(s));
        actions.push(map().center(if a == 0 { BIN_STAY } else { BIN_SWITCH }));
        rewards.push(reward(s, a, shift) * reward_scale);
        next.extend(one_hot(next_state(s, a)));
    }
    TrainingData::from_raw(2, states, actions, rewards, next, vec![false; n]).unwrap()
}

pub fn mdp_action(a: f64) -> Option<usize> {
    let bin = map().bin_of(a);
    if bin == BIN_STAY {
        Some(0)
    } else if bin == BIN_SWITCH {
        Some(1)
    } else {
        None
    }
}

pub fn td3bc_config() -> Td3BcConfig {
    Td3BcConfig { gamma: GAMMA, gradient_steps: 3000, hidden: vec![64, 64], ..Default::default() }
}

pub fn bcq_config() -> BcqConfig {
    BcqConfig { gamma: GAMMA, gradient_steps: 3000, hidden: vec![64, 64], lr: 1e-3, ..Default::default() }
}

pub fn cql_config() -> CqlConfig {
    CqlConfig { gamma: GAMMA, gradient_steps: 3000, hidden: vec![64, 64], lr: 1e-3, ..Default::default() }
}

pub fn greedy(policy: &Policy) -> [Option<usize>; 2] {
    [0, 1].map(|s| mdp_action(policy.act(&one_hot(s)).unwrap()))
}
