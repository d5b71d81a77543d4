use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::heads::{argmax, likely_bins, masked_argmax};
use super::DiscreteActionMap;
use crate::data::Normalization;
use crate::env::{denormalize_action, BasalController, Observation, FEATURE_DIM};
use crate::nn::{load_weights, save_weights, Matrix, Network, WeightFile};
use crate::sim::PumpConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Td3Bc,
    Bcq,
    Cql,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Td3Bc, Algorithm::Bcq, Algorithm::Cql];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td3Bc => "td3-bc",
            Algorithm::Bcq => "bcq",
            Algorithm::Cql => "cql",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}; expected td3-bc, bcq or cql")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    Continuous { actor: Network },
    Discrete { q: Network, imitation: Option<Network>, threshold: f64, map: DiscreteActionMap },
}

/// A trained deterministic policy mapping raw feature vectors to normalized
/// basal actions in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub algorithm: Algorithm,
    pub normalization: Normalization,
    /// factor applied to rewards during training
    pub reward_scale: f64,
    /// free-form provenance saved alongside the weights
    pub provenance: toml::Table,
    head: Head,
}

impl Policy {
    pub fn continuous(algorithm: Algorithm, actor: Network, normalization: Normalization, reward_scale: f64) -> Self {
        Policy { algorithm, normalization, reward_scale, provenance: toml::Table::new(), head: Head::Continuous { actor } }
    }

    pub fn discrete(
        algorithm: Algorithm,
        q: Network,
        imitation: Option<Network>,
        threshold: f64,
        map: DiscreteActionMap,
        normalization: Normalization,
        reward_scale: f64,
    ) -> Self {
        Policy {
            algorithm,
            normalization,
            reward_scale,
            provenance: toml::Table::new(),
            head: Head::Discrete { q, imitation, threshold, map },
        }
    }

    pub fn state_dim(&self) -> usize {
        self.normalization.mean.len()
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.head, Head::Discrete { .. })
    }

    pub fn action_map(&self) -> Option<DiscreteActionMap> {
        match &self.head {
            Head::Discrete { map, .. } => Some(*map),
            Head::Continuous { .. } => None,
        }
    }

    /// Same networks with a different behaviour-likelihood threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Policy> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid("threshold", "must lie in [0, 1]"));
        }
        let mut p = self.clone();
        match &mut p.head {
            Head::Discrete { imitation: Some(_), threshold: t, .. } => *t = threshold,
            _ => return Err(Error::invalid("threshold", "policy has no behaviour head")),
        }
        Ok(p)
    }

    fn normalize(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), got: raw.cols });
        }
        let mut out = Matrix::zeros(raw.rows, raw.cols);
        for r in 0..raw.rows {
            self.normalization.apply(raw.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    /// Q value of every bin, for discrete policies.
    pub fn q_values(&self, features: &[f64]) -> Result<Option<Vec<f64>>> {
        match &self.head {
            Head::Discrete { q, .. } => {
                let x = self.normalize(&Matrix::from_vec(1, features.len(), features.to_vec()))?;
                Ok(Some(q.forward(&x)?.data))
            }
            Head::Continuous { .. } => Ok(None),
        }
    }

    /// Behaviour-model logits, for BCQ policies.
    pub fn behavior_logits(&self, features: &[f64]) -> Result<Option<Vec<f64>>> {
        match &self.head {
            Head::Discrete { imitation: Some(i), .. } => {
                let x = self.normalize(&Matrix::from_vec(1, features.len(), features.to_vec()))?;
                Ok(Some(i.forward(&x)?.data))
            }
            _ => Ok(None),
        }
    }

    pub fn act_batch(&self, raw_features: &Matrix) -> Result<Vec<f64>> {
        let x = self.normalize(raw_features)?;
        match &self.head {
            Head::Continuous { actor } => Ok(actor.forward(&x)?.data.into_iter().map(|a| a.clamp(-1.0, 1.0)).collect()),
            Head::Discrete { q, imitation, threshold, map } => {
                let qv = q.forward(&x)?;
                let logits = imitation.as_ref().map(|i| i.forward(&x)).transpose()?;
                Ok((0..x.rows)
                    .map(|r| {
                        let bin = match &logits {
                            Some(l) => {
                                let allowed = likely_bins(l.row(r), *threshold);
                                masked_argmax(qv.row(r), |k| allowed[k])
                            }
                            None => argmax(qv.row(r)),
                        };
                        map.center(bin)
                    })
                    .collect())
            }
        }
    }

    pub fn act(&self, features: &[f64]) -> Result<f64> {
        Ok(self.act_batch(&Matrix::from_vec(1, features.len(), features.to_vec()))?[0])
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut meta = toml::Table::new();
        meta.insert("algorithm".into(), self.algorithm.name().into());
        meta.insert("reward_scale".into(), self.reward_scale.into());
        let floats = |v: &[f64]| toml::Value::Array(v.iter().map(|&x| toml::Value::Float(x)).collect());
        meta.insert("normalization_mean".into(), floats(&self.normalization.mean));
        meta.insert("normalization_sd".into(), floats(&self.normalization.sd));
        meta.insert("provenance".into(), toml::Value::Table(self.provenance.clone()));
        let networks = match &self.head {
            Head::Continuous { actor } => {
                meta.insert("kind".into(), "continuous".into());
                vec![("actor".to_string(), actor.clone())]
            }
            Head::Discrete { q, imitation, threshold, map } => {
                meta.insert("kind".into(), "discrete".into());
                meta.insert("n_bins".into(), (map.n_bins as i64).into());
                meta.insert("threshold".into(), (*threshold).into());
                let mut nets = vec![("q".to_string(), q.clone())];
                if let Some(i) = imitation {
                    nets.push(("imitation".to_string(), i.clone()));
                }
                nets
            }
        };
        WeightFile { networks, meta }
    }

    pub fn from_weight_file(file: WeightFile) -> Result<Policy> {
        let meta = &file.meta;
        let get = |k: &str| meta.get(k).ok_or_else(|| Error::Format(format!("policy file lacks {k:?}")));
        let str_of = |k: &str| -> Result<String> {
            get(k)?.as_str().map(str::to_string).ok_or_else(|| Error::Format(format!("{k:?} must be a string")))
        };
        let float_of = |k: &str| -> Result<f64> {
            get(k)?.as_float().ok_or_else(|| Error::Format(format!("{k:?} must be a float")))
        };
        let floats_of = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .as_array()
                .and_then(|a| a.iter().map(|v| v.as_float()).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::Format(format!("{k:?} must be a float array")))
        };
        let algorithm: Algorithm = str_of("algorithm")?.parse().map_err(|_| Error::Format("unknown algorithm".into()))?;
        let normalization = Normalization { mean: floats_of("normalization_mean")?, sd: floats_of("normalization_sd")? };
        let reward_scale = float_of("reward_scale")?;
        let provenance = meta.get("provenance").and_then(|v| v.as_table()).cloned().unwrap_or_default();
        let kind = str_of("kind")?;
        let head = match kind.as_str() {
            "continuous" => Head::Continuous { actor: file.network("actor")?.clone() },
            "discrete" => {
                let n_bins = get("n_bins")?.as_integer().ok_or_else(|| Error::Format("n_bins must be an integer".into()))?;
                let map = DiscreteActionMap::new(usize::try_from(n_bins).map_err(|_| Error::Format("negative n_bins".into()))?)?;
                Head::Discrete {
                    q: file.network("q")?.clone(),
                    imitation: file.network("imitation").ok().cloned(),
                    threshold: float_of("threshold")?,
                    map,
                }
            }
            other => return Err(Error::Format(format!("unknown policy kind {other:?}"))),
        };
        let policy = Policy { algorithm, normalization, reward_scale, provenance, head };
        policy.check_shapes()?;
        Ok(policy)
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.state_dim();
        if self.normalization.sd.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.normalization.sd.len() });
        }
        let (nets, out): (Vec<&Network>, usize) = match &self.head {
            Head::Continuous { actor } => (vec![actor], 1),
            Head::Discrete { q, imitation, map, .. } => (std::iter::once(q).chain(imitation.iter()).collect(), map.n_bins),
        };
        for net in nets {
            if net.input_dim() != d || net.output_dim() != out {
                return Err(Error::ArchitectureMismatch {
                    expected: format!("{d} inputs, {out} outputs"),
                    found: net.architecture().to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_weights(path, &self.to_weight_file())
    }

    pub fn load(path: &Path) -> Result<Policy> {
        Policy::from_weight_file(load_weights(path)?)
    }
}

/// Drives the environment with a policy: features in, pump-quantized basal
/// rate out.
#[derive(Debug, Clone)]
pub struct PolicyController<'a> {
    policy: &'a Policy,
    max_basal_u_per_h: f64,
    pump: PumpConfig,
}

impl<'a> PolicyController<'a> {
    pub fn new(policy: &'a Policy, max_basal_u_per_h: f64, pump: PumpConfig) -> Result<Self> {
        if policy.state_dim() != FEATURE_DIM {
            return Err(Error::DimensionMismatch { expected: FEATURE_DIM, got: policy.state_dim() });
        }
        Ok(PolicyController { policy, max_basal_u_per_h, pump })
    }
}

impl BasalController for PolicyController<'_> {
    fn basal_rate(&mut self, obs: &Observation) -> f64 {
        let a = self.policy.act(obs.features.as_slice()).expect("feature width checked at construction");
        denormalize_action(a, self.max_basal_u_per_h, &self.pump)
    }
}
