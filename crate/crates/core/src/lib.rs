//! Queue length estimation at fixed-time signals from connected vehicles,
//! optionally equipped with range sensors that detect the vehicle behind.
//!
//! The crate bundles a point-queue simulator, closed-form moments and error
//! variances, overflow-queue approximations, the per-cycle estimators, and a
//! Monte Carlo harness that checks the closed forms against simulation.

pub mod analytic;
pub mod config;
pub mod error;
pub mod harness;
pub mod estimators;
pub mod model;
pub mod overflow;
pub mod quadrature;
pub mod rng;
pub mod oracle;
pub mod sim;
pub mod stats;

pub use config::{RunConfig, SensorMode, SignalDemandConfig};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, EstimatorStream};
pub use model::{CvObservation, CycleOutcome, EstimateResult, Scenario};
pub use overflow::{OverflowKind, OverflowModel};
