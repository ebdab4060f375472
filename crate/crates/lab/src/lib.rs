//! Scenario runner for the class A laboratory: JSON configs in, JSON reports
//! and CSV plot data out.

pub mod pack;
pub mod plot;
pub mod scenario;
pub mod tasks;

pub use scenario::{load_scenario, parse_scenario, ConfigError, Scenario, Task};
pub use tasks::{run_scenario, RunOutcome};
