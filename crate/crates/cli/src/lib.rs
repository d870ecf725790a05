//! Scenario files and task dispatch for the `ionctl` command line.

pub mod run;
pub mod scenario;

pub use run::{run, RunError, RunReport};
pub use scenario::{emit_scenario, parse_scenario, Scenario, ScenarioError, Task};
