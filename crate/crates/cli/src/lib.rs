//! Library surface of the experiment runner, kept separate from the binary
//! so integration tests can drive full scenarios in-process.

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{parse_config, ExperimentConfig, Scenario, ALL_SCENARIOS};
pub use report::{convergence_csv, posterior_csv, write_reports};
pub use scenario::{run_scenario, CheckResult, ComparisonTable, ExperimentReport};
