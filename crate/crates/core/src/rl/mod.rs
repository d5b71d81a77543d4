//! Offline learners: continuous TD3-BC and discrete-action BCQ and CQL over a
//! binned basal action.

mod actions;
mod bcq;
mod cql;
mod heads;
mod policy;
mod td3bc;
mod training;

pub use actions::DiscreteActionMap;
pub use bcq::{train_bcq_discrete, BcqConfig};
pub use cql::{train_cql_discrete, CqlConfig};
pub use heads::logsumexp;
pub use policy::{Algorithm, Policy, PolicyController};
pub use td3bc::{train_td3bc, Td3BcConfig};
pub use training::{sample_indices, Batch, Checkpoint, TrainingData, TrainingLog, DEFAULT_REWARD_SCALE};
