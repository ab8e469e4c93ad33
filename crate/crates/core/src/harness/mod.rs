//! Experiment harness: scenario files, Monte Carlo runner, result files.

pub mod config;
pub mod experiment;
pub mod output;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentFile, ExperimentSpec, PbMode, Transport, UePlacement, UeRegion};
pub use experiment::{
    run_experiment, run_experiment_with, ExperimentReport, OracleSurface, Summary, Surface, TrialRecord, UdpSurface,
};
pub use output::{emit_results, read_csv, read_json, write_csv, write_json, OutputFormat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("output: {0}")]
    Format(String),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Sweep(#[from] crate::sweep::SweepError),
    #[error(transparent)]
    Localization(#[from] crate::localization::LocalizationError),
    #[error(transparent)]
    Client(#[from] crate::control::ClientError),
    #[error(transparent)]
    Rdars(#[from] crate::rdars::RdarsError),
}

impl HarnessError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Format(_) => "format",
            Self::Channel(_) => "channel",
            Self::Geometry(_) => "geometry",
            Self::Sweep(_) => "sweep",
            Self::Localization(_) => "localization",
            Self::Client(_) => "transport",
            Self::Rdars(_) => "rdars",
        }
    }
}
