//! Closed-loop simulation: plant, estimation noise, references and the
//! mission scheduler.

pub mod log;
pub mod mission;
pub mod noise;
pub mod reference;
pub mod vehicle;

pub use log::{ControlRecord, EventKind, MissionLog, MissionOutcome, MissionSummary, PlanEvent};
pub use mission::{run_mission, MissionError, RateConfig};
pub use noise::{estimate, NoiseParams};
pub use reference::{LineProfile, RefSample, Reference};
pub use vehicle::{dynamics_step, AttitudeMode, DragModel, VehicleParams};
