//! Closed-loop simulation harness and experiment drivers.

mod config;
mod experiments;
mod export;
mod log;
mod metrics;
mod plant;
mod runner;
mod wind;

pub use config::{SimConfig, SimulationSettings, TurbineSection};
pub use experiments::{
    compare_controllers, max_threads, np_sweep, run_all, terminal_ablation, Ablation, AblationRow, Comparison,
    ComparisonRow, NpSweep, RunResult, SweepRow, THREADS_ENV,
};
pub use export::{export_ablation, export_comparison, export_run, export_sweep};
pub use log::{SimLog, SimRecord};
pub use metrics::{compute_metrics, Metrics, PlateauMetrics};
pub use plant::Plant;
pub use runner::{run_simulation, Scenario, SimOutcome};
pub use wind::{Plateau, WindProfile};
