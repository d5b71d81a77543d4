use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{OuParams, PidParams};
use crate::env::Padding;
use crate::{fsutil, Error, Result};

pub const LOG_FORMAT_VERSION: u32 = 1;

/// One control step of a demonstrator rollout. Column order in the CSV file
/// follows field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step_index: usize,
    pub episode_id: u64,
    pub patient_id: String,
    pub seed: u64,
    /// mg/dl
    pub true_glucose: f64,
    /// mg/dl
    pub cgm: f64,
    /// U/h
    pub basal: f64,
    /// U
    pub bolus: f64,
    /// g
    pub true_carbs: f64,
    /// g
    pub announced_carbs: f64,
    pub reward: f64,
    pub done: bool,
}

/// Provenance and everything needed to rebuild transitions from the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMetadata {
    pub format_version: u32,
    pub patient_id: String,
    #[serde(with = "crate::seeds::as_text")]
    pub seed: u64,
    pub n_samples: usize,
    pub episode_steps: usize,
    pub control_period_minutes: f64,
    pub glucose_lower_mg_dl: f64,
    pub glucose_upper_mg_dl: f64,
    pub max_basal_u_per_h: f64,
    /// feature values assumed before the first step of every episode
    pub padding: Padding,
    pub demonstrator: PidParams,
    pub ou: OuParams,
    pub carb_noise_sd: f64,
    pub bolus_overestimate: f64,
    pub meal_time_sd_minutes: f64,
    /// sha256 of the CSV file, filled in on save
    #[serde(default)]
    pub rows_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub meta: LogMetadata,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    /// Rows grouped by episode, in file order.
    pub fn episodes(&self) -> impl Iterator<Item = &[LogRow]> {
        self.rows.chunk_by(|a, b| a.episode_id == b.episode_id)
    }

    /// Step indices contiguous from 0 within each episode, `done` set on the
    /// final row of each episode and nowhere else, no repeated episode ids.
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::MalformedLog("log has no rows".into()));
        }
        if self.rows.len() != self.meta.n_samples {
            return Err(Error::MalformedLog(format!(
                "metadata declares {} samples, file holds {}",
                self.meta.n_samples,
                self.rows.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for ep in self.episodes() {
            let id = ep[0].episode_id;
            if !seen.insert(id) {
                return Err(Error::MalformedLog(format!("episode {id} is split")));
            }
            for (k, row) in ep.iter().enumerate() {
                if row.step_index != k {
                    return Err(Error::MalformedLog(format!(
                        "episode {id}: expected step {k}, found {}",
                        row.step_index
                    )));
                }
                if row.done != (k + 1 == ep.len()) {
                    return Err(Error::MalformedLog(format!("episode {id}: misplaced done flag at step {k}")));
                }
                let values = [row.true_glucose, row.cgm, row.basal, row.bolus, row.true_carbs, row.announced_carbs, row.reward];
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MalformedLog(format!("episode {id}: non-finite value at step {k}")));
                }
            }
        }
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.toml");
    path.with_file_name(name)
}

fn encode_rows(rows: &[LogRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Writes `path` (CSV) and `path.meta.toml` (metadata with the CSV checksum),
/// each atomically. Returns the CSV checksum.
pub fn save_log(path: &Path, log: &TrajectoryLog) -> Result<String> {
    log.validate()?;
    let bytes = encode_rows(&log.rows)?;
    let mut meta = log.meta.clone();
    meta.rows_sha256 = fsutil::sha256_hex(&bytes);
    let meta_text = toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;
    fsutil::write_atomic(path, &bytes)?;
    fsutil::write_atomic(&sidecar_path(path), meta_text.as_bytes())?;
    Ok(meta.rows_sha256)
}

/// Parses CSV bytes against metadata, verifying the checksum and version
/// before reading any row.
pub fn parse_log(csv_bytes: &[u8], meta_text: &str, path: &Path) -> Result<TrajectoryLog> {
    let meta: LogMetadata = toml::from_str(meta_text).map_err(|e| Error::Format(e.to_string()))?;
    if meta.format_version != LOG_FORMAT_VERSION {
        return Err(Error::VersionMismatch { expected: LOG_FORMAT_VERSION, found: meta.format_version });
    }
    let found = fsutil::sha256_hex(csv_bytes);
    if found != meta.rows_sha256 {
        return Err(Error::Checksum { path: path.to_path_buf() });
    }
    let mut reader = csv::Reader::from_reader(csv_bytes);
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<LogRow>, _>>()
        .map_err(|e| Error::MalformedLog(e.to_string()))?;
    let log = TrajectoryLog { meta, rows };
    log.validate()?;
    Ok(log)
}

pub fn load_log(path: &Path) -> Result<TrajectoryLog> {
    let bytes = fsutil::read(path)?;
    let sidecar = sidecar_path(path);
    let meta = fsutil::read(&sidecar)?;
    let meta = String::from_utf8(meta).map_err(|e| Error::Format(e.to_string()))?;
    parse_log(&bytes, &meta, path)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_log() -> TrajectoryLog {
        let row = |ep: u64, k: usize, done: bool| LogRow {
            step_index: k,
            episode_id: ep,
            patient_id: "adult#001".into(),
            seed: 4,
            true_glucose: 140.0 + k as f64 / 3.0,
            cgm: 141.123456789012345,
            basal: 1.05,
            bolus: 0.0,
            true_carbs: 0.0,
            announced_carbs: 0.0,
            reward: -0.1 * k as f64,
            done,
        };
        TrajectoryLog {
            meta: LogMetadata {
                format_version: LOG_FORMAT_VERSION,
                patient_id: "adult#001".into(),
                seed: 4,
                n_samples: 5,
                episode_steps: 3,
                control_period_minutes: 3.0,
                glucose_lower_mg_dl: 10.0,
                glucose_upper_mg_dl: 1000.0,
                max_basal_u_per_h: 4.0,
                padding: Padding { cgm: 140.0, basal_u_per_h: 1.0 },
                demonstrator: PidParams::new(-1e-3, 0.0, 0.0),
                ou: OuParams::default(),
                carb_noise_sd: 0.1,
                bolus_overestimate: 0.0,
                meal_time_sd_minutes: 30.0,
                rows_sha256: String::new(),
            },
            rows: vec![row(0, 0, false), row(0, 1, false), row(0, 2, true), row(1, 0, false), row(1, 1, true)],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = tiny_log();
        let sha = save_log(&path, &log).unwrap();
        let back = load_log(&path).unwrap();
        assert_eq!(back.rows, log.rows);
        assert_eq!(back.meta.rows_sha256, sha);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step_index,episode_id,patient_id,seed,true_glucose,cgm,basal,bolus,true_carbs,announced_carbs,reward,done\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        save_log(&path, &tiny_log()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_log(&path), Err(Error::Checksum { .. })));
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        save_log(&path, &tiny_log()).unwrap();
        let side = sidecar_path(&path);
        let text = std::fs::read_to_string(&side).unwrap().replace("format_version = 1", "format_version = 7");
        std::fs::write(&side, text).unwrap();
        assert!(matches!(load_log(&path), Err(Error::VersionMismatch { found: 7, .. })));
    }

    #[test]
    fn non_contiguous_steps_are_rejected() {
        let mut log = tiny_log();
        log.rows[1].step_index = 5;
        assert!(matches!(log.validate(), Err(Error::MalformedLog(_))));
        let mut log = tiny_log();
        log.rows[0].done = true;
        assert!(matches!(log.validate(), Err(Error::MalformedLog(_))));
    }
}
