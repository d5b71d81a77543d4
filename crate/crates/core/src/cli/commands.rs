use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{manifest_path, Manifest, RunConfig};
use crate::control::{load_pid_file, rank_pid_grid, render_pid_file, PidFile, PID_FILE_VERSION};
use crate::data::{load_log, save_log, sidecar_path};
use crate::eval::{
    compute_metrics, learner_seed, pid_traces, policy_traces, render_report_csv, render_summary, rollout_metrics,
    run_scenario, test_seeds, train_algorithm, training_data_from_log, training_log, PointSettings, PolicyCache,
    ScenarioResult, ScenarioRow,
};
use crate::rl::{Algorithm, Policy};
use crate::sim::PatientParams;
use crate::{fsutil, Error, Result};

/// Demonstrator ranks stored by `tune-pid`.
pub const TUNED_RANKS: [usize; 3] = [1, 10, 20];

pub fn patient_slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn pid_path(out: &Path, patient_id: &str) -> PathBuf {
    out.join("pid").join(format!("{}.toml", patient_slug(patient_id)))
}

pub fn dataset_path(out: &Path, patient_id: &str, seed: u64) -> PathBuf {
    out.join("data").join(format!("{}_seed{seed}.csv", patient_slug(patient_id)))
}

pub fn policy_path(out: &Path, algorithm: Algorithm, patient_id: &str, seed: u64) -> PathBuf {
    out.join("policies").join(format!("{}_{}_seed{seed}.glwt", algorithm, patient_slug(patient_id)))
}

/// A validated config bound to its output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Workspace {
    pub fn new(cfg: RunConfig) -> Self {
        let out = cfg.out_dir.clone();
        Workspace { cfg, out }
    }

    fn rel(&self, path: &Path) -> String {
        let p = path.strip_prefix(&self.out).unwrap_or(path);
        p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.cfg.sha256())
    }

    /// Records an upstream file, checking it against the manifest of the
    /// command that produced it when that manifest exists.
    fn input(&self, m: &mut Manifest, path: &Path, upstream: &str) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                hint: format!("run `glucolab {upstream}` with this config first"),
            });
        }
        let rel = self.rel(path);
        let found = fsutil::sha256_file(path)?;
        let up = manifest_path(&self.out, upstream);
        if up.exists() {
            if let Some(expected) = Manifest::load(&up)?.outputs.get(&rel) {
                if *expected != found {
                    return Err(Error::HashMismatch { path: path.to_path_buf(), expected: expected.clone(), found });
                }
            }
        }
        m.inputs.insert(rel, found);
        Ok(())
    }

    fn output(&self, m: &mut Manifest, path: &Path) -> Result<()> {
        m.outputs.insert(self.rel(path), fsutil::sha256_file(path)?);
        Ok(())
    }

    fn write(&self, m: &mut Manifest, path: &Path, bytes: &[u8]) -> Result<()> {
        fsutil::write_atomic(path, bytes)?;
        self.output(m, path)
    }

    fn jobs<'a>(&self, patients: &'a [PatientParams]) -> Vec<(&'a PatientParams, u64)> {
        patients
            .iter()
            .flat_map(|p| self.cfg.training_seeds.iter().map(move |&s| (p, s)))
            .collect()
    }

    fn demonstrators(&self, m: &mut Manifest, patients: &[PatientParams]) -> Result<BTreeMap<String, PidFile>> {
        let mut out = BTreeMap::new();
        for p in patients {
            let path = pid_path(&self.out, &p.id);
            self.input(m, &path, "tune-pid")?;
            let file = load_pid_file(&path)?;
            if file.patient_id != p.id {
                return Err(Error::Format(format!("{} belongs to `{}`", path.display(), file.patient_id)));
            }
            out.insert(p.id.clone(), file);
        }
        Ok(out)
    }

    fn finish(&self, m: &Manifest, mut lines: Vec<String>) -> Result<Vec<String>> {
        let path = m.save(&self.out)?;
        lines.push(format!("manifest {} ({} outputs)", path.display(), m.outputs.len()));
        Ok(lines)
    }
}

pub fn cmd_tune_pid(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let mut m = ws.manifest("tune-pid");
    let mut lines = Vec::new();
    for p in cfg.resolve_patients()? {
        let ranked = rank_pid_grid(&cfg.tuning, &p, &cfg.pipeline.env)?;
        let file = PidFile {
            format_version: PID_FILE_VERSION,
            patient_id: p.id.clone(),
            grid_size: cfg.tuning.cardinality(),
            tuning_seed: cfg.tuning.seed,
            ranked: TUNED_RANKS.iter().filter_map(|&r| ranked.get(r - 1).copied()).collect(),
        };
        ws.write(&mut m, &pid_path(&ws.out, &p.id), render_pid_file(&file).as_bytes())?;
        let best = ranked[0];
        lines.push(format!(
            "{}: kp {} ki {} kd {} (reward {:.1})",
            p.id, best.params.kp, best.params.ki, best.params.kd, best.total_reward
        ));
    }
    ws.finish(&m, lines)
}

pub fn cmd_generate(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let settings = PointSettings::resolve(&cfg.point, &cfg.pipeline)?;
    let patients = cfg.resolve_patients()?;
    let mut m = ws.manifest("generate");
    let demos = ws.demonstrators(&mut m, &patients)?;
    let written: Vec<(PathBuf, usize)> = ws
        .jobs(&patients)
        .par_iter()
        .map(|&(p, s)| {
            let pid = demos[&p.id].rank(settings.demonstrator_rank)?.params;
            let log = training_log(p, &pid, &settings, &cfg.pipeline, s)?;
            let path = dataset_path(&ws.out, &p.id, s);
            save_log(&path, &log)?;
            Ok((path, log.rows.len()))
        })
        .collect::<Result<_>>()?;
    let mut lines = Vec::new();
    for (path, n) in &written {
        ws.output(&mut m, path)?;
        ws.output(&mut m, &sidecar_path(path))?;
        lines.push(format!("{}: {n} samples", path.display()));
    }
    ws.finish(&m, lines)
}

pub fn cmd_train(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let patients = cfg.resolve_patients()?;
    let jobs = ws.jobs(&patients);
    let mut m = ws.manifest("train");
    for &(p, s) in &jobs {
        let path = dataset_path(&ws.out, &p.id, s);
        ws.input(&mut m, &path, "generate")?;
        ws.input(&mut m, &sidecar_path(&path), "generate")?;
    }
    let written: Vec<PathBuf> = jobs
        .par_iter()
        .map(|&(p, s)| -> Result<Vec<PathBuf>> {
            let log = load_log(&dataset_path(&ws.out, &p.id, s))?;
            let data = training_data_from_log(&log, &cfg.pipeline)?;
            cfg.algorithms
                .iter()
                .map(|&a| {
                    let policy = train_algorithm(a, &data, &cfg.pipeline, learner_seed(s, a))?;
                    let path = policy_path(&ws.out, a, &p.id, s);
                    policy.save(&path)?;
                    Ok(path)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut lines = Vec::new();
    for path in &written {
        ws.output(&mut m, path)?;
        lines.push(format!("{}", path.display()));
    }
    ws.finish(&m, lines)
}

const ROLLOUT_HEADER: &str = "controller,patient_id,age_group,training_seed,test_index,reward_sum,tir_pct,tbr_pct,tar_pct,cv_pct,failed";

pub fn cmd_evaluate(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let settings = PointSettings::resolve(&cfg.point, &cfg.pipeline)?;
    let patients = cfg.resolve_patients()?;
    let jobs = ws.jobs(&patients);
    let mut m = ws.manifest("evaluate");
    let demos = ws.demonstrators(&mut m, &patients)?;
    let mut policies = BTreeMap::new();
    for &a in &cfg.algorithms {
        for &(p, s) in &jobs {
            let path = policy_path(&ws.out, a, &p.id, s);
            ws.input(&mut m, &path, "train")?;
            policies.insert((a, p.id.clone(), s), Policy::load(&path)?);
        }
    }

    let env = settings.evaluation_env(&cfg.pipeline.env);
    let n_test = cfg.pipeline.test_seeds_per_training_seed;
    let mut rollouts = String::from(ROLLOUT_HEADER);
    rollouts.push('\n');
    let mut rows = Vec::new();
    let controllers: Vec<Option<Algorithm>> = std::iter::once(None).chain(cfg.algorithms.iter().copied().map(Some)).collect();
    for c in controllers {
        let name = c.map_or("pid", Algorithm::name);
        let mut traces = Vec::new();
        for &(p, s) in &jobs {
            let seeds = test_seeds(s, n_test);
            let t = match c {
                None => pid_traces(&demos[&p.id].rank(settings.demonstrator_rank)?.params, p, &env, &seeds)?,
                Some(a) => policy_traces(&policies[&(a, p.id.clone(), s)], p, &env, &seeds)?,
            };
            for (k, trace) in t.iter().enumerate() {
                let r = rollout_metrics(trace)?;
                writeln!(
                    rollouts,
                    "{name},{},{},{s},{k},{},{},{},{},{},{}",
                    p.id, p.age_group.as_str(), r.reward_sum, r.tir_pct, r.tbr_pct, r.tar_pct, r.cv_pct, r.failed
                )
                .expect("string write");
            }
            traces.extend(t);
        }
        rows.push(ScenarioRow { controller: name.into(), report: compute_metrics(&traces)?, traces });
    }
    let result = [ScenarioResult { config: cfg.point, rows }];
    let summary = render_summary(&result);
    let reports = ws.out.join("reports");
    ws.write(&mut m, &reports.join("evaluation.csv"), render_report_csv(&result).as_bytes())?;
    ws.write(&mut m, &reports.join("evaluation.txt"), summary.as_bytes())?;
    ws.write(&mut m, &reports.join("rollouts.csv"), rollouts.as_bytes())?;
    ws.finish(&m, summary.lines().map(String::from).collect())
}

pub fn cmd_scenario(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let kind = cfg.scenario.kind;
    let points = cfg.scenario.points()?;
    let patients = cfg.resolve_patients()?;
    let mut m = ws.manifest(&format!("scenario-{kind}"));
    let demos = ws.demonstrators(&mut m, &patients)?;
    let mut cache = PolicyCache::default();
    let results = points
        .iter()
        .map(|point| run_scenario(point, &cfg.algorithms, &patients, &demos, &cfg.training_seeds, &cfg.pipeline, &mut cache))
        .collect::<Result<Vec<_>>>()?;
    let table = match kind.figure() {
        Some(name) => ws.out.join("figures").join(name),
        None => ws.out.join("reports").join(format!("scenario_{kind}.csv")),
    };
    let summary = render_summary(&results);
    ws.write(&mut m, &table, render_report_csv(&results).as_bytes())?;
    ws.write(&mut m, &ws.out.join("reports").join(format!("scenario_{kind}.txt")), summary.as_bytes())?;
    ws.finish(&m, summary.lines().map(String::from).collect())
}

pub fn cmd_verify(ws: &Workspace) -> Result<Vec<String>> {
    let dir = ws.out.join("manifests");
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        return Err(Error::MissingArtifact { path: dir, hint: "no manifests found; run a command first".into() });
    }
    paths.sort();
    let mut lines = Vec::new();
    for path in paths {
        let m = Manifest::load(&path)?;
        let checked = m.verify(&ws.out)?;
        lines.push(format!("{}: {} files ok", m.command, checked.len()));
    }
    Ok(lines)
}
