//! End-to-end runner for the cone pipeline and the file formats at its
//! boundary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod formats;
pub mod pipeline;

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

pub use config::PipelineConfig;
pub use evaluate::{evaluate_map, MapMetrics};
pub use pipeline::{run_pipeline, MetricsReport, RunOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io_error",
            CliError::InvalidConfig(_) => "invalid_config",
            CliError::MissingFile(_) => "missing_file",
            CliError::Parse { .. } => "parse_error",
            CliError::Stage { .. } => "stage_error",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl From<conetrack_sim::SimError> for CliError {
    fn from(e: conetrack_sim::SimError) -> Self {
        CliError::InvalidConfig(e.to_string())
    }
}
