//! Declarative scenarios: load a TOML document, run simulation, filter bank,
//! detection and accommodation end to end, and write deterministic traces.

mod config;
mod output;
pub mod presets;
mod run;

use thiserror::Error;

pub use config::{
    apply_override, load_scenario, load_with_overrides, AccommodationSection, DetectionSection,
    FaultSection, FilterInit, FilterSection, FormationSection, GraphSection, InitialKind,
    InitialSection, KbarChoice, OutputSection, ScenarioConfig, Target, TargetSpec,
};
pub use output::{format_float, report_json, write_outputs, PLOT_SCRIPT};
pub use run::{
    initial_positions, run_scenario, AccommodationReport, DetectionReport, FilterReport, RunOutput,
    RunReport, Traces,
};

use crate::accommodation::AccommodationError;
use crate::dynamics::DynamicsError;
use crate::fif::FilterError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Accommodation(#[from] AccommodationError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// Parse and validation problems are the caller's fault; everything else
    /// happened while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, ScenarioError::Parse(_) | ScenarioError::Validation { .. })
    }
}
