//! Command-line driver: tuning, data generation, training, evaluation and
//! scenario sweeps from a TOML run configuration, with hashed manifests.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_generate, cmd_scenario, cmd_train, cmd_tune_pid, cmd_verify, dataset_path, patient_slug,
    pid_path, policy_path, Workspace, TUNED_RANKS,
};
pub use config::{RunConfig, ScenarioSpec};
pub use manifest::{manifest_path, Manifest, MANIFEST_FORMAT_VERSION};

use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "glucolab", version, about = "Offline RL basal-insulin laboratory")]
pub struct Cli {
    /// run configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// upper bound on parallel jobs
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// replace the configured training seeds with this single seed
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    /// output directory, overriding `out_dir` in the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// grid-search PID gains and store ranks 1, 10 and 20 per patient
    TunePid,
    /// simulate the demonstrator and write the offline datasets
    Generate,
    /// train the configured learners on the stored datasets
    Train,
    /// evaluate the stored policies and the demonstrator PID
    Evaluate,
    /// run a scenario sweep and write its figure data
    Scenario,
    /// re-hash every file recorded in the run's manifests
    Verify,
}

impl Cli {
    /// Loads the config and applies the command-line overrides.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None if self.command == Command::Verify => RunConfig::default(),
            None => return Err(Error::Config("--config PATH is required".into())),
        };
        if let Some(s) = self.seed_override {
            cfg.training_seeds = vec![s];
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

/// Runs a parsed command line; the returned lines are printed by the binary.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let cfg = cli.run_config()?;
    if cli.command != Command::Verify {
        cfg.validate()?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ws = Workspace::new(cfg);
    pool.install(|| match cli.command {
        Command::TunePid => cmd_tune_pid(&ws),
        Command::Generate => cmd_generate(&ws),
        Command::Train => cmd_train(&ws),
        Command::Evaluate => cmd_evaluate(&ws),
        Command::Scenario => cmd_scenario(&ws),
        Command::Verify => cmd_verify(&ws),
    })
}
