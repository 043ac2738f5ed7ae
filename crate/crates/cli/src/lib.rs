//! Scenario runner for the nisakns toolkit: config parsing, command
//! orchestration, CSV/JSON artifacts and plot scripts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenario;

pub use config::{emit, parse_config, ScenarioConfig};
pub use error::CliError;
pub use scenario::{run_scenario, Command, RunOptions, VerifyReport};
