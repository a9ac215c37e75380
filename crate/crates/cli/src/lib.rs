//! Scenario configuration and the subcommands behind the `mmv` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_capm, cmd_list_scenarios, cmd_montecarlo, cmd_simulate, cmd_solve, RunOptions};
pub use config::{resolve_seed, OutputFormat, ScenarioConfig};
