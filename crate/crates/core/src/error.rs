use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation diverged at t = {clock} min: {detail}")]
    SimulationDiverged { clock: f64, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("insufficient history: need {needed} steps, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("step called on a finished episode")]
    StepAfterDone,

    #[error("empty grid")]
    EmptyGrid,

    #[error("invalid grid point: {0}")]
    InvalidGridPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("architecture mismatch: expected {expected}, found {found}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("non-finite {what} at gradient step {step}")]
    NonFiniteLoss { what: String, step: usize },

    #[error("malformed log: {0}")]
    MalformedLog(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch for {}", path.display())]
    Checksum { path: PathBuf },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("hash mismatch for {}: manifest has {expected}, file has {found}", path.display())]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 configuration, 3 missing or inconsistent
    /// artifact, 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidGridPoint(_) | Error::EmptyGrid => 2,
            Error::MissingArtifact { .. }
            | Error::HashMismatch { .. }
            | Error::Checksum { .. }
            | Error::VersionMismatch { .. }
            | Error::MalformedLog(_)
            | Error::Format(_)
            | Error::ArchitectureMismatch { .. }
            | Error::Io { .. } => 3,
            Error::SimulationDiverged { .. } | Error::NonFiniteLoss { .. } => 4,
            Error::InsufficientHistory { .. } | Error::StepAfterDone | Error::DimensionMismatch { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
