//! Demonstrator trajectory logs, their on-disk form, and offline datasets
//! derived from them.

mod generate;
mod log;
mod transitions;

pub use generate::{generate_dataset, GenerationSpec};
pub use log::{load_log, parse_log, save_log, sidecar_path, LogMetadata, LogRow, TrajectoryLog, LOG_FORMAT_VERSION};
pub use transitions::{build_transitions, Normalization, OfflineDataset, Transition};
