use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::GridSpec;
use crate::eval::{PipelineConfig, ScenarioConfig, ScenarioKind};
use crate::rl::Algorithm;
use crate::sim::{builtin_cohort, load_cohort, PatientParams};
use crate::{fsutil, Error, Result};

/// Which scenario sweep `scenario` runs. An empty parameter list means the
/// full grid of the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub parameters: Vec<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec { kind: ScenarioKind::SampleSize, parameters: Vec::new() }
    }
}

impl ScenarioSpec {
    pub fn points(&self) -> Result<Vec<ScenarioConfig>> {
        let params = if self.parameters.is_empty() { self.kind.grid() } else { self.parameters.clone() };
        params
            .into_iter()
            .map(|parameter| {
                let c = ScenarioConfig { kind: self.kind, parameter };
                c.validate().map(|_| c)
            })
            .collect()
    }
}

/// Declarative run description shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// cohort file; the shipped cohort when absent
    pub cohort_path: Option<PathBuf>,
    pub patients: Vec<String>,
    pub training_seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    /// grid point that `generate`, `train` and `evaluate` run at
    pub point: ScenarioConfig,
    pub tuning: GridSpec,
    pub pipeline: PipelineConfig,
    pub scenario: ScenarioSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("run"),
            cohort_path: None,
            patients: vec!["adult#001".into(), "adult#002".into(), "adult#003".into()],
            training_seeds: vec![1, 2, 3],
            algorithms: Algorithm::ALL.to_vec(),
            point: ScenarioConfig::standard(),
            tuning: GridSpec::default(),
            pipeline: PipelineConfig::default(),
            scenario: ScenarioSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checksum of the canonical rendering, so formatting and comments in
    /// the source file do not matter.
    pub fn sha256(&self) -> String {
        fsutil::sha256_hex(self.render().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.patients.is_empty() {
            return Err(Error::Config("`patients` is empty".into()));
        }
        if self.training_seeds.is_empty() {
            return Err(Error::Config("`training_seeds` is empty".into()));
        }
        if self.pipeline.test_seeds_per_training_seed == 0 {
            return Err(Error::Config("`pipeline.test_seeds_per_training_seed` must be positive".into()));
        }
        self.point.validate()?;
        self.pipeline.env.episode.validate()?;
        self.pipeline.td3bc.validate()?;
        self.resolve_patients().map(|_| ())
    }

    pub fn resolve_patients(&self) -> Result<Vec<PatientParams>> {
        let cohort = match &self.cohort_path {
            Some(p) => load_cohort(p)?,
            None => builtin_cohort(),
        };
        self.patients.iter().map(|id| cohort.get(id).cloned()).collect()
    }
}
