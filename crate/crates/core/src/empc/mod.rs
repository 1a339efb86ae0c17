//! Economic MPC: objective, finite-horizon problem and the receding-horizon
//! controller with its baseline variants.

mod config;
mod controller;
mod fhocp;
mod objective;

pub use config::{EmpcConfig, Variant};
pub use controller::{ControlCommand, EmpcController, Fallback, Measurements, StepInfo};
pub use fhocp::{assemble_fhocp, FhocpData, FhocpLayout, Trajectory};
pub use objective::{velocity_objective, velocity_weight};
