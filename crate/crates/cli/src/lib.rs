//! Scenario loading and execution for the pitch-control simulation CLI.

pub mod scenario;

pub use scenario::{
    run_scenario, write_artifacts, RunAnalysis, RunOutcome, Scenario, ScenarioError,
    ScenarioReport,
};
