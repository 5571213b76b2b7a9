//! Experiment orchestration: configuration files, trajectory recording,
//! metric export, and bound-versus-measurement reports.

pub mod config;
pub mod ops;
pub mod record;
pub mod runner;

pub use config::{Experiment, RunConfig};
pub use ops::{bounds, compare, sweep, AlgorithmSpec, CompareReport, SweepParam, SweepReport};
pub use record::{DegreeOfConsensus, MetricRow, RunRecord};
pub use runner::{run, run_replicas};
