use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::AgeGroup;
use crate::{Error, Result};

pub const RANGE_LOW_MG_DL: f64 = 70.0;
pub const RANGE_HIGH_MG_DL: f64 = 180.0;

/// What one evaluation rollout left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub patient_id: String,
    pub age_group: AgeGroup,
    /// CGM readings, one per control step
    pub cgm: Vec<f64>,
    pub reward_sum: f64,
    /// true glucose left the admissible range and ended the episode
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub tir_pct: f64,
    pub tbr_pct: f64,
    pub tar_pct: f64,
    pub cv_pct: f64,
    pub reward_sum: f64,
    pub failed: bool,
}

/// Time in range `[70, 180]`, below 70, above 180, and the coefficient of
/// variation with the population sd.
pub fn rollout_metrics(trace: &RolloutTrace) -> Result<RolloutMetrics> {
    let g = &trace.cgm;
    if g.is_empty() {
        return Err(Error::invalid("trace", "no glucose readings"));
    }
    let n = g.len() as f64;
    let in_range = g.iter().filter(|&&v| (RANGE_LOW_MG_DL..=RANGE_HIGH_MG_DL).contains(&v)).count();
    let below = g.iter().filter(|&&v| v < RANGE_LOW_MG_DL).count();
    let above = g.iter().filter(|&&v| v > RANGE_HIGH_MG_DL).count();
    let mean = g.iter().sum::<f64>() / n;
    let sd = (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    Ok(RolloutMetrics {
        tir_pct: 100.0 * in_range as f64 / n,
        tbr_pct: 100.0 * below as f64 / n,
        tar_pct: 100.0 * above as f64 / n,
        cv_pct: 100.0 * sd / mean,
        reward_sum: trace.reward_sum,
        failed: trace.failed,
    })
}

/// Mean and standard error (sample sd over sqrt n; zero for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanSe { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return MeanSe { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        MeanSe { mean, se: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n_rollouts: usize,
    pub reward_sum: MeanSe,
    pub tir_pct: MeanSe,
    pub tbr_pct: MeanSe,
    pub tar_pct: MeanSe,
    pub cv_pct: MeanSe,
    pub failure_pct: MeanSe,
}

/// Whether a summary meets the consensus clinical targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalFlags {
    pub tir_above_70: bool,
    pub tbr_below_4: bool,
    pub cv_below_36: bool,
    pub no_failures: bool,
}

impl MetricSummary {
    fn of(metrics: &[RolloutMetrics]) -> MetricSummary {
        let col = |f: fn(&RolloutMetrics) -> f64| MeanSe::of(&metrics.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            n_rollouts: metrics.len(),
            reward_sum: col(|m| m.reward_sum),
            tir_pct: col(|m| m.tir_pct),
            tbr_pct: col(|m| m.tbr_pct),
            tar_pct: col(|m| m.tar_pct),
            cv_pct: col(|m| m.cv_pct),
            failure_pct: col(|m| if m.failed { 100.0 } else { 0.0 }),
        }
    }

    pub fn clinical_flags(&self) -> ClinicalFlags {
        ClinicalFlags {
            tir_above_70: self.tir_pct.mean > 70.0,
            tbr_below_4: self.tbr_pct.mean < 4.0,
            cv_below_36: self.cv_pct.mean < 36.0,
            no_failures: self.failure_pct.mean == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlycemicReport {
    pub overall: MetricSummary,
    pub by_age_group: BTreeMap<AgeGroup, MetricSummary>,
}

pub fn compute_metrics(traces: &[RolloutTrace]) -> Result<GlycemicReport> {
    if traces.is_empty() {
        return Err(Error::invalid("traces", "no rollouts"));
    }
    let per: Vec<(AgeGroup, RolloutMetrics)> =
        traces.iter().map(|t| Ok((t.age_group, rollout_metrics(t)?))).collect::<Result<_>>()?;
    let all: Vec<RolloutMetrics> = per.iter().map(|(_, m)| *m).collect();
    let mut groups: BTreeMap<AgeGroup, Vec<RolloutMetrics>> = BTreeMap::new();
    for (g, m) in per {
        groups.entry(g).or_default().push(m);
    }
    Ok(GlycemicReport {
        overall: MetricSummary::of(&all),
        by_age_group: groups.into_iter().map(|(g, ms)| (g, MetricSummary::of(&ms))).collect(),
    })
}
