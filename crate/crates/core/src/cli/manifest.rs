use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{fsutil, Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// What one command read and wrote. Paths are relative to the run
/// directory; no timestamps, so reruns reproduce the file byte for byte.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join("manifests").join(format!("{command}.toml"))
}

impl Manifest {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: command.into(),
            config_sha256,
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let m: Manifest =
            toml::from_str(&String::from_utf8_lossy(&bytes)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::VersionMismatch { expected: MANIFEST_FORMAT_VERSION, found: m.format_version });
        }
        Ok(m)
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = manifest_path(out_dir, &self.command);
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fsutil::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    /// Re-hashes every recorded file. Returns the paths checked.
    pub fn verify(&self, out_dir: &Path) -> Result<Vec<String>> {
        let mut checked = Vec::new();
        for (rel, expected) in self.inputs.iter().chain(&self.outputs) {
            let path = out_dir.join(rel);
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    path,
                    hint: format!("recorded by the `{}` manifest", self.command),
                });
            }
            let found = fsutil::sha256_file(&path)?;
            if &found != expected {
                return Err(Error::HashMismatch { path, expected: expected.clone(), found });
            }
            checked.push(rel.clone());
        }
        Ok(checked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        fsutil::write_atomic(&dir.path().join("data/a.csv"), b"x,y\n1,2\n").unwrap();
        let mut m = Manifest::new("generate", "00".into());
        m.outputs.insert("data/a.csv".into(), fsutil::sha256_hex(b"x,y\n1,2\n"));
        let path = m.save(dir.path()).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.verify(dir.path()).unwrap(), vec!["data/a.csv".to_string()]);

        fsutil::write_atomic(&dir.path().join("data/a.csv"), b"x,y\n1,3\n").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::HashMismatch { .. })));
        std::fs::remove_file(dir.path().join("data/a.csv")).unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::MissingArtifact { .. })));
    }
}
