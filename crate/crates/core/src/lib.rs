//! Identification of the thermal load signature of a subway-station HVAC
//! system from sensor time series.
//!
//! The crate fits the passenger, envelope and refrigerator coefficients of
//! a grey-box energy balance by a constrained relative-L1 grid search,
//! splits the load into passenger- and environment-introduced parts, and
//! ships a synthetic station generator that serves as an identification
//! oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ingest;
pub mod models;
pub mod regression;
pub mod synth;
pub mod types;

pub use ingest::{
    average_channels, build_frames, build_segments, classify_mode, interpolate_passengers,
    parse_csv, BuildOptions, ColumnMap, FrameSeries, IngestError, ModeRule, SensorRecord,
};
pub use models::{
    balance_target, fan_airflow, load, load_signature, supply, LoadParts, SupplyBreakdown,
};
pub use regression::{
    assemble, best_beta, grid_fit, grid_fit_with_surface, integrate, objective, Axis, Basis,
    CellEvaluation, FitError, FitResult, GridSpec, RegressionSystem, Spacing,
};
pub use synth::{emit_csv, simulate, Scenario, SimulatedRun, SynthError};
pub use types::{theta_is_feasible, Frame, HvacMode, LoadSignature, StationConstants, Theta};
