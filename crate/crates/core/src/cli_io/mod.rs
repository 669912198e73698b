//! Scenario files, CSV schemas, quadrant classification and the staged
//! simulate-match-estimate-report pipeline.

mod csvio;
mod pipeline;
mod quadrant;
mod scenario;
mod selftest;

use thiserror::Error;

pub use csvio::{ingest_demand_csv, ingest_panel_csv, write_demand_csv, write_panel_csv, DEMAND_HEADER, PANEL_HEADER};
pub use pipeline::{
    run_config, run_pipeline, sha256_hex, Model, OutputFile, PipelineOptions, RunManifest, Stage, VERSION,
};
pub use quadrant::{classify_quadrant, QuadrantLabel};
pub use scenario::{parse_scenario, parse_scenario_str, scenario_to_json};
pub use selftest::{selftest, Check};

use crate::econometrics::EconError;
use crate::matching::MatchError;
use crate::panel_synth::PanelError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: schema mismatch: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: row {row}: {message}")]
    Row { path: String, row: usize, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 3,
            CliError::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        match self {
            s @ CliError::Stage { .. } => s,
            other => CliError::Stage { stage, source: Box::new(other) },
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        CliError::Numeric(e.to_string())
    }
}
