//! Binary weight files.
//!
//! Layout: `GLWT` magic, u32 LE format version, u32 LE header length, a TOML
//! header describing each named network and free-form metadata, the flat
//! `f64` LE parameter payload of every network in header order, and a
//! trailing SHA-256 over all preceding bytes. The checksum is verified before
//! anything else is parsed, so truncated files never load partially.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Architecture, Network};
use crate::{fsutil, Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"GLWT";
const DIGEST_LEN: usize = 32;

/// A bundle of named networks plus metadata (normalization stats, policy
/// kind and so on).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFile {
    pub networks: Vec<(String, Network)>,
    pub meta: toml::Table,
}

impl WeightFile {
    pub fn network(&self, name: &str) -> Result<&Network> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| Error::Format(format!("weight file has no network named {name:?}")))
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    name: String,
    #[serde(flatten)]
    arch: Architecture,
    param_count: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(default)]
    meta: toml::Table,
    #[serde(rename = "network")]
    networks: Vec<NetworkHeader>,
}

pub fn encode_weights(file: &WeightFile) -> Result<Vec<u8>> {
    let header = Header {
        meta: file.meta.clone(),
        networks: file
            .networks
            .iter()
            .map(|(name, net)| NetworkHeader {
                name: name.clone(),
                arch: net.architecture().clone(),
                param_count: net.params().len(),
            })
            .collect(),
    };
    let header = toml::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    let n_params: usize = file.networks.iter().map(|(_, n)| n.params().len()).sum();
    let mut out = Vec::with_capacity(12 + header.len() + 8 * n_params + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&WEIGHTS_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (_, net) in &file.networks {
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<WeightFile> {
    if bytes.len() < 12 + DIGEST_LEN {
        return Err(Error::Checksum { path: path.to_path_buf() });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum { path: path.to_path_buf() });
    }
    if &body[..4] != MAGIC {
        return Err(Error::Format(format!("{} is not a weight file", path.display())));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    if version != WEIGHTS_FORMAT_VERSION {
        return Err(Error::VersionMismatch { expected: WEIGHTS_FORMAT_VERSION, found: version });
    }
    let header_len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let header_bytes = body
        .get(12..12 + header_len)
        .ok_or_else(|| Error::Format("header extends past end of file".into()))?;
    let header_text = std::str::from_utf8(header_bytes).map_err(|e| Error::Format(e.to_string()))?;
    let header: Header = toml::from_str(header_text).map_err(|e| Error::Format(e.to_string()))?;
    let mut payload = &body[12 + header_len..];
    let total: usize = header.networks.iter().map(|h| h.param_count).sum();
    if payload.len() != total * 8 {
        return Err(Error::Format(format!("payload holds {} bytes, header declares {} parameters", payload.len(), total)));
    }
    let mut networks = Vec::with_capacity(header.networks.len());
    for h in header.networks {
        let params: Vec<f64> = payload[..h.param_count * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        payload = &payload[h.param_count * 8..];
        networks.push((h.name, Network::from_params(h.arch, params)?));
    }
    Ok(WeightFile { networks, meta: header.meta })
}

pub fn save_weights(path: &Path, file: &WeightFile) -> Result<()> {
    fsutil::write_atomic(path, &encode_weights(file)?)
}

pub fn load_weights(path: &Path) -> Result<WeightFile> {
    decode_weights(&fsutil::read(path)?, path)
}

pub fn save_network(path: &Path, net: &Network) -> Result<()> {
    save_weights(path, &WeightFile { networks: vec![("net".into(), net.clone())], meta: toml::Table::new() })
}

/// Loads a single-network file, rejecting it unless the stored architecture
/// equals `expected`.
pub fn load_network(path: &Path, expected: &Architecture) -> Result<Network> {
    let file = load_weights(path)?;
    let (_, net) = file
        .networks
        .into_iter()
        .next()
        .ok_or_else(|| Error::Format("weight file holds no networks".into()))?;
    if net.architecture() != expected {
        return Err(Error::ArchitectureMismatch {
            expected: expected.to_string(),
            found: net.architecture().to_string(),
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::seeds::stream;

    fn sample() -> Network {
        Network::mlp(3, &[5, 4], 2, Activation::Tanh, &mut stream(9, "io", &[])).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let net = sample();
        save_network(&path, &net).unwrap();
        let back = load_network(&path, net.architecture()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn multi_network_with_meta() {
        let mut meta = toml::Table::new();
        meta.insert("kind".into(), "continuous".into());
        let file = WeightFile { networks: vec![("a".into(), sample()), ("b".into(), sample())], meta };
        let bytes = encode_weights(&file).unwrap();
        assert_eq!(decode_weights(&bytes, Path::new("x")).unwrap(), file);
    }

    #[test]
    fn architecture_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_network(&path, &sample()).unwrap();
        let other = Architecture { layer_sizes: vec![3, 2], activations: vec![Activation::Identity] };
        assert!(matches!(load_network(&path, &other), Err(Error::ArchitectureMismatch { .. })));
    }

    #[test]
    fn corruption_and_truncation_fail_checksum() {
        let file = WeightFile { networks: vec![("n".into(), sample())], meta: Default::default() };
        let mut bytes = encode_weights(&file).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode_weights(&bytes, Path::new("x")), Err(Error::Checksum { .. })));
        let bytes = encode_weights(&file).unwrap();
        assert!(matches!(decode_weights(&bytes[..bytes.len() - 9], Path::new("x")), Err(Error::Checksum { .. })));
        assert!(matches!(decode_weights(&bytes[..5], Path::new("x")), Err(Error::Checksum { .. })));
    }
}
