//! Offline reinforcement learning laboratory for basal insulin dosing.
//!
//! The crate bundles a seedable virtual-patient glucose simulator, classical
//! control baselines (PID with a mealtime bolus calculator), an episodic
//! environment with the clinical risk reward, offline dataset tooling, a small
//! dense-network engine, three offline learners (TD3-BC, discrete BCQ and
//! discrete CQL) and the evaluation and scenario harness used to compare them.

pub mod cli;
pub mod control;
pub mod data;
pub mod env;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod nn;
pub mod rl;
pub mod seeds;
pub mod sim;

pub use error::{Error, Result};
