//! Command-line front end: configuration, subcommands and output files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{build_outputs, run_command, CliError, RunSummary, Subcommand};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
