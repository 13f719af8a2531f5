//! Scenario generation and benchmark runs.

pub mod generate;
pub mod run;
pub mod scenario;

pub use generate::{generate_scenario, GenError, GenSpec};
pub use run::{run, sweep, Axis, BenchRow, RunError, Status, SweepSpec};
pub use scenario::{Scenario, ScenarioError, ScenarioMeta};
