//! Closed-loop pitch-control simulation toolkit.
//!
//! Building blocks for simulating an aircraft pitch autopilot loop:
//! continuous-time plant and actuator models ([`lti`]), a Mamdani fuzzy
//! inference engine that schedules PID gain increments ([`fuzzy`]), discrete
//! controllers from plain proportional up to fuzzy self-tuning PID
//! ([`controllers`]), the closed-loop simulator itself ([`simloop`]), and
//! step-response quality metrics ([`metrics`]).

pub mod controllers;
pub mod fuzzy;
pub mod lti;
pub mod metrics;
pub mod simloop;

pub use controllers::{Controller, ControllerSpec, PidGains};
pub use fuzzy::{FuzzyInferenceSystem, GainIncrements, RuleTable, TermLabel};
pub use lti::{PlantCatalog, StateSpaceModel, TransferFunction};
pub use metrics::{DisturbanceMetrics, MetricsComparison, StepMetrics};
pub use simloop::{DisturbanceSpec, LoopConfig, ReferenceSpec, SimulationTrace};

#[doc = include_str!("../../../README.md")]
#[cfg(doctest)]
struct ReadmeDoctests;
