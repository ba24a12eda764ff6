//! Experiment harness for the mirror-attack bench: scenario configuration,
//! the experiment pipelines and their on-disk artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod scenario;

pub use commands::{cmd_metrics, Harness, PlacementSource};
pub use config::ScenarioConfig;
pub use error::{HarnessError, Result};
pub use scenario::{AttackOutcome, Scenario};
