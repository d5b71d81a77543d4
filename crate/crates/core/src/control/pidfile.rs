use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PidParams;
use crate::{fsutil, Error, Result};

pub const PID_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedPid {
    pub rank: usize,
    pub total_reward: f64,
    #[serde(flatten)]
    pub params: PidParams,
}

/// Tuned and suboptimal PID gains of one patient, stored in the same
/// key-value format as the cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidFile {
    pub format_version: u32,
    pub patient_id: String,
    pub grid_size: usize,
    pub tuning_seed: u64,
    #[serde(rename = "pid")]
    pub ranked: Vec<RankedPid>,
}

impl PidFile {
    pub fn rank(&self, rank: usize) -> Result<&RankedPid> {
        self.ranked
            .iter()
            .find(|r| r.rank == rank)
            .ok_or_else(|| Error::Config(format!("PID file for `{}` has no rank {rank}", self.patient_id)))
    }
}

pub fn render_pid_file(file: &PidFile) -> String {
    toml::to_string(file).expect("pid file serializes")
}

pub fn parse_pid_file(text: &str) -> Result<PidFile> {
    let f: PidFile = toml::from_str(text).map_err(|e| Error::Format(format!("pid file: {e}")))?;
    if f.format_version != PID_FILE_VERSION {
        return Err(Error::VersionMismatch {
            expected: PID_FILE_VERSION,
            found: f.format_version,
        });
    }
    Ok(f)
}

pub fn load_pid_file(path: &Path) -> Result<PidFile> {
    let bytes = fsutil::read(path)?;
    parse_pid_file(&String::from_utf8_lossy(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = PidFile {
            format_version: 1,
            patient_id: "adult#001".into(),
            grid_size: 3,
            tuning_seed: 4,
            ranked: vec![RankedPid { rank: 1, total_reward: -123.25, params: PidParams::new(-1e-3, 1e-5, 0.1) }],
        };
        let text = render_pid_file(&f);
        assert_eq!(parse_pid_file(&text).unwrap(), f);
        assert!(f.rank(2).is_err());
    }
}
