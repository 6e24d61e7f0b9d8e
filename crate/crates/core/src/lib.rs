//! Fault detection, isolation and accommodation for planar multi-agent
//! consensus and formation control.
//!
//! One observer agent runs a bank of fault-identification filters, one per
//! agent, on its relative measurements. A constant velocity fault on any agent
//! is detected and isolated by the matched filter, whose residual estimates
//! the fault vector. A leader agent then steers the team centroid back with
//! minimum-energy inputs.
//!
//! Agent indices are 0-based throughout the library API. Configs, reports and
//! CLI output use 1-based numbering; [`graph::Graph::new`] and the
//! [`scenario`] layer do the conversion.

pub mod accommodation;
pub mod cli;
pub mod dynamics;
pub mod fif;
pub mod graph;
pub mod numerics;
pub mod scenario;

pub use accommodation::{
    accommodate_loop, estimate_centroid, gramian, optimal_control, AccommodationController,
    AccommodationError, AccommodationOutcome, LeaderEstimate, Plant,
};
pub use dynamics::{
    build_model, centroid, measurement, step, DynamicsError, FaultEvent, FormationSpec,
    LeaderInput, StateVector, SystemModel,
};
pub use fif::{
    detectability_index, synthesize, DetectionResult, Detector, DetectorConfig, FaultFilter,
    FilterBank, FilterError, KbarPolicy,
};
pub use graph::{GeodesicTable, Graph, GraphError};
pub use scenario::{run_scenario, RunReport, ScenarioConfig, ScenarioError};
