use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluation_env, pid_traces, policy_traces, test_seeds};
use super::metrics::{compute_metrics, GlycemicReport, MetricSummary, RolloutTrace};
use crate::control::{OuParams, PidFile, PidParams};
use crate::data::{build_transitions, generate_dataset, GenerationSpec, TrajectoryLog};
use crate::env::EnvConfig;
use crate::rl::{
    train_bcq_discrete, train_cql_discrete, train_td3bc, Algorithm, BcqConfig, CqlConfig, DiscreteActionMap, Policy,
    Td3BcConfig, TrainingData, DEFAULT_REWARD_SCALE,
};
use crate::seeds::{derive_seed, label_hash};
use crate::sim::PatientParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Standard,
    SampleSize,
    BolusOverestimate,
    SuboptimalPid,
    IrregularMeals,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Standard => "standard",
            ScenarioKind::SampleSize => "sample_size",
            ScenarioKind::BolusOverestimate => "bolus_overestimate",
            ScenarioKind::SuboptimalPid => "suboptimal_pid",
            ScenarioKind::IrregularMeals => "irregular_meals",
        }
    }

    /// Every admissible parameter value, in presentation order.
    pub fn grid(self) -> Vec<f64> {
        match self {
            ScenarioKind::Standard => vec![0.0],
            ScenarioKind::SampleSize => vec![1e4, 5e4, 1e5, 5e5],
            ScenarioKind::BolusOverestimate => vec![0.0, 0.1, 0.2, 0.3, 0.4],
            ScenarioKind::SuboptimalPid => vec![1.0, 10.0, 20.0],
            ScenarioKind::IrregularMeals => vec![0.0, 30.0, 60.0],
        }
    }

    /// Name of the figure data file the scenario feeds.
    pub fn figure(self) -> Option<&'static str> {
        match self {
            ScenarioKind::Standard => None,
            ScenarioKind::SampleSize => Some("fig1a.csv"),
            ScenarioKind::BolusOverestimate => Some("fig1b.csv"),
            ScenarioKind::SuboptimalPid => Some("fig2a.csv"),
            ScenarioKind::IrregularMeals => Some("fig2b.csv"),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One grid point: sample count, overestimation fraction, demonstrator rank
/// or meal-time sd in minutes, depending on the kind. Ignored for standard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub parameter: f64,
}

impl ScenarioConfig {
    pub fn standard() -> Self {
        ScenarioConfig { kind: ScenarioKind::Standard, parameter: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ScenarioKind::Standard || self.kind.grid().contains(&self.parameter) {
            Ok(())
        } else {
            Err(Error::InvalidGridPoint(format!(
                "{} does not admit {}; expected one of {:?}",
                self.kind,
                self.parameter,
                self.kind.grid()
            )))
        }
    }
}

/// Settings shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub env: EnvConfig,
    pub n_samples: usize,
    pub ou: OuParams,
    pub carb_noise_sd: f64,
    pub reward_scale: f64,
    pub n_bins: usize,
    pub test_seeds_per_training_seed: usize,
    pub td3bc: Td3BcConfig,
    pub bcq: BcqConfig,
    pub cql: CqlConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            env: EnvConfig::default(),
            n_samples: 100_000,
            ou: OuParams::default(),
            carb_noise_sd: 0.1,
            reward_scale: DEFAULT_REWARD_SCALE,
            n_bins: 16,
            test_seeds_per_training_seed: 3,
            td3bc: Td3BcConfig::default(),
            bcq: BcqConfig::default(),
            cql: CqlConfig::default(),
        }
    }
}

/// What a grid point changes relative to the standard pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub n_samples: usize,
    pub demonstrator_rank: usize,
    pub meal_time_sd_minutes: f64,
    pub include_snacks: bool,
    pub bolus_overestimate: f64,
}

impl PointSettings {
    pub fn resolve(point: &ScenarioConfig, pipeline: &PipelineConfig) -> Result<Self> {
        point.validate()?;
        let meals = &pipeline.env.meals;
        let mut s = PointSettings {
            n_samples: pipeline.n_samples,
            demonstrator_rank: 1,
            meal_time_sd_minutes: meals.time_sd_minutes,
            include_snacks: meals.include_snacks,
            bolus_overestimate: 0.0,
        };
        let p = point.parameter;
        match point.kind {
            ScenarioKind::Standard => {}
            ScenarioKind::SampleSize => s.n_samples = p as usize,
            ScenarioKind::BolusOverestimate => s.bolus_overestimate = p,
            ScenarioKind::SuboptimalPid => s.demonstrator_rank = p as usize,
            ScenarioKind::IrregularMeals => {
                // a fixed routine: no timing noise and no snacks
                s.meal_time_sd_minutes = p;
                s.include_snacks = p > 0.0 && meals.include_snacks;
            }
        }
        Ok(s)
    }

    pub fn training_env(&self, base: &EnvConfig) -> EnvConfig {
        let mut env = base.clone();
        env.meals.time_sd_minutes = self.meal_time_sd_minutes;
        env.meals.include_snacks = self.include_snacks;
        env
    }

    pub fn evaluation_env(&self, base: &EnvConfig) -> EnvConfig {
        let mut env = evaluation_env(&self.training_env(base));
        env.announcement.overestimate = self.bolus_overestimate;
        env
    }

    /// Identifies the trained policy; evaluation-only settings are excluded
    /// so they reuse policies.
    fn policy_key(&self, algorithm: Algorithm, patient: &str, seed: u64) -> String {
        format!(
            "{algorithm}|{patient}|{seed}|{}|{}|{}|{}",
            self.n_samples,
            self.demonstrator_rank,
            self.meal_time_sd_minutes.to_bits(),
            self.include_snacks
        )
    }
}

pub fn dataset_seed(training_seed: u64) -> u64 {
    derive_seed(training_seed, &[label_hash("dataset")])
}

pub fn learner_seed(training_seed: u64, algorithm: Algorithm) -> u64 {
    derive_seed(training_seed, &[label_hash("learner"), label_hash(algorithm.name())])
}

/// Trained policies shared across grid points.
#[derive(Debug, Default, Clone)]
pub struct PolicyCache {
    policies: HashMap<String, Policy>,
}

impl PolicyCache {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }
}

pub fn train_algorithm(algorithm: Algorithm, data: &TrainingData, pipeline: &PipelineConfig, seed: u64) -> Result<Policy> {
    let map = DiscreteActionMap::new(pipeline.n_bins)?;
    Ok(match algorithm {
        Algorithm::Td3Bc => train_td3bc(data, &pipeline.td3bc, seed)?.0,
        Algorithm::Bcq => train_bcq_discrete(data, &pipeline.bcq, &map, seed)?.0,
        Algorithm::Cql => train_cql_discrete(data, &pipeline.cql, &map, seed)?.0,
    })
}

/// Simulates the demonstrator log a (patient, training seed) job trains on.
pub fn training_log(
    patient: &PatientParams,
    demonstrator: &PidParams,
    settings: &PointSettings,
    pipeline: &PipelineConfig,
    training_seed: u64,
) -> Result<TrajectoryLog> {
    let spec = GenerationSpec {
        n_samples: settings.n_samples,
        ou: pipeline.ou,
        carb_noise_sd: pipeline.carb_noise_sd,
        seed: dataset_seed(training_seed),
    };
    generate_dataset(patient, &settings.training_env(&pipeline.env), demonstrator, &spec)
}

pub fn training_data_from_log(log: &TrajectoryLog, pipeline: &PipelineConfig) -> Result<TrainingData> {
    TrainingData::from_dataset(&build_transitions(log)?, pipeline.reward_scale)
}

/// Builds the offline dataset a (patient, seed) job trains on.
pub fn training_data(
    patient: &PatientParams,
    demonstrator: &PidParams,
    settings: &PointSettings,
    pipeline: &PipelineConfig,
    training_seed: u64,
) -> Result<TrainingData> {
    training_data_from_log(&training_log(patient, demonstrator, settings, pipeline, training_seed)?, pipeline)
}

/// Evaluation results of one controller at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub controller: String,
    pub report: GlycemicReport,
    pub traces: Vec<RolloutTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub rows: Vec<ScenarioRow>,
}

impl ScenarioResult {
    pub fn row(&self, controller: &str) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.controller == controller)
    }
}

fn demonstrator_for(demonstrators: &BTreeMap<String, PidFile>, patient: &PatientParams, rank: usize) -> Result<PidParams> {
    let file = demonstrators.get(&patient.id).ok_or_else(|| Error::MissingArtifact {
        path: format!("pid/{}.toml", patient.id).into(),
        hint: "run tune-pid for this patient first".into(),
    })?;
    Ok(file.rank(rank)?.params)
}

/// Trains (or reuses) every (algorithm, patient, training seed) policy for
/// the grid point and evaluates it, together with the demonstrator PID, on
/// `test_seeds_per_training_seed` test seeds per training seed.
pub fn run_scenario(
    point: &ScenarioConfig,
    algorithms: &[Algorithm],
    patients: &[PatientParams],
    demonstrators: &BTreeMap<String, PidFile>,
    training_seeds: &[u64],
    pipeline: &PipelineConfig,
    cache: &mut PolicyCache,
) -> Result<ScenarioResult> {
    let settings = PointSettings::resolve(point, pipeline)?;
    if patients.is_empty() || training_seeds.is_empty() {
        return Err(Error::Config("scenario needs at least one patient and one training seed".into()));
    }
    let jobs: Vec<(&PatientParams, u64)> =
        patients.iter().flat_map(|p| training_seeds.iter().map(move |&s| (p, s))).collect();

    let missing: Vec<(&PatientParams, u64)> = jobs
        .iter()
        .copied()
        .filter(|(p, s)| algorithms.iter().any(|&a| !cache.policies.contains_key(&settings.policy_key(a, &p.id, *s))))
        .collect();
    let trained: Vec<(String, Policy)> = missing
        .par_iter()
        .map(|&(p, s)| -> Result<Vec<(String, Policy)>> {
            let pid = demonstrator_for(demonstrators, p, settings.demonstrator_rank)?;
            let data = training_data(p, &pid, &settings, pipeline, s)?;
            algorithms
                .iter()
                .filter(|&&a| !cache.policies.contains_key(&settings.policy_key(a, &p.id, s)))
                .map(|&a| Ok((settings.policy_key(a, &p.id, s), train_algorithm(a, &data, pipeline, learner_seed(s, a))?)))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    cache.policies.extend(trained);

    let eval_env = settings.evaluation_env(&pipeline.env);
    let n_test = pipeline.test_seeds_per_training_seed;
    let mut rows = Vec::new();
    let mut pid_all = Vec::new();
    for &(p, s) in &jobs {
        let pid = demonstrator_for(demonstrators, p, settings.demonstrator_rank)?;
        pid_all.extend(pid_traces(&pid, p, &eval_env, &test_seeds(s, n_test))?);
    }
    rows.push(ScenarioRow { controller: "pid".into(), report: compute_metrics(&pid_all)?, traces: pid_all });
    for &a in algorithms {
        let mut traces = Vec::new();
        for &(p, s) in &jobs {
            let policy = &cache.policies[&settings.policy_key(a, &p.id, s)];
            traces.extend(policy_traces(policy, p, &eval_env, &test_seeds(s, n_test))?);
        }
        rows.push(ScenarioRow { controller: a.name().into(), report: compute_metrics(&traces)?, traces });
    }
    Ok(ScenarioResult { config: *point, rows })
}

fn summary_fields(s: &MetricSummary) -> [f64; 12] {
    [
        s.reward_sum.mean,
        s.reward_sum.se,
        s.tir_pct.mean,
        s.tir_pct.se,
        s.tbr_pct.mean,
        s.tbr_pct.se,
        s.tar_pct.mean,
        s.tar_pct.se,
        s.cv_pct.mean,
        s.cv_pct.se,
        s.failure_pct.mean,
        s.failure_pct.se,
    ]
}

pub const REPORT_HEADER: &str = "scenario,parameter,controller,group,n_rollouts,reward_mean,reward_se,tir_mean,tir_se,tbr_mean,tbr_se,tar_mean,tar_se,cv_mean,cv_se,failure_mean,failure_se";

/// Tabular report: one line per (grid point, controller, group), where the
/// group is `all` or an age group.
pub fn render_report_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in results {
        for row in &r.rows {
            let groups = std::iter::once(("all".to_string(), &row.report.overall))
                .chain(row.report.by_age_group.iter().map(|(g, s)| (g.to_string(), s)));
            for (group, s) in groups {
                let fields: Vec<String> = summary_fields(s).iter().map(|v| v.to_string()).collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.config.kind,
                    r.config.parameter,
                    row.controller,
                    group,
                    s.n_rollouts,
                    fields.join(",")
                ));
            }
        }
    }
    out
}

/// Plain-text summary with clinical-target annotations.
pub fn render_summary(results: &[ScenarioResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!("{} = {}\n", r.config.kind, r.config.parameter));
        for row in &r.rows {
            let s = &row.report.overall;
            let f = s.clinical_flags();
            let mark = |ok: bool| if ok { "" } else { "*" };
            out.push_str(&format!(
                "  {:<8} reward {:>12.1} ± {:<8.1} TIR {:>5.1}{} ± {:<4.1} TBR {:>4.1}{} ± {:<4.1} CV {:>4.1}{} ± {:<4.1} failure {:>5.1}{} ({} rollouts)\n",
                row.controller,
                s.reward_sum.mean,
                s.reward_sum.se,
                s.tir_pct.mean,
                mark(f.tir_above_70),
                s.tir_pct.se,
                s.tbr_pct.mean,
                mark(f.tbr_below_4),
                s.tbr_pct.se,
                s.cv_pct.mean,
                mark(f.cv_below_36),
                s.cv_pct.se,
                s.failure_pct.mean,
                mark(f.no_failures),
                s.n_rollouts
            ));
        }
    }
    out.push_str("* misses the clinical target (TIR > 70%, TBR < 4%, CV < 36%, no failures)\n");
    out
}
