//! Clinical metrics, seeded evaluation rollouts and the scenario grid.

mod evaluate;
mod metrics;
mod scenario;

pub use evaluate::{evaluate_pid, evaluate_policy, evaluation_env, pid_traces, policy_traces, rollout, test_seed, test_seeds};
pub use metrics::{
    compute_metrics, rollout_metrics, ClinicalFlags, GlycemicReport, MeanSe, MetricSummary, RolloutMetrics, RolloutTrace,
    RANGE_HIGH_MG_DL, RANGE_LOW_MG_DL,
};
pub use scenario::{
    dataset_seed, learner_seed, render_report_csv, render_summary, run_scenario, train_algorithm, training_data,
    training_data_from_log, training_log,
    PipelineConfig, PointSettings, PolicyCache, ScenarioConfig, ScenarioKind, ScenarioResult, ScenarioRow, REPORT_HEADER,
};
