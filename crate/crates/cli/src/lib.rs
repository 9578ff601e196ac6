//! File I/O and orchestration behind the `wnorient` binary.

pub mod io;
mod run;

pub use run::{
    artifact_paths, generate_fixture, run_orient, ArtifactPaths, Fixture, HistogramReport, MetricsReport,
    ObjectiveReport, Report, RunConfig, RunSummary,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wnorient_core::Error),
}
