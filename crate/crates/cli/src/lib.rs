//! Configuration, CSV export and subcommands behind the `tcellsim` binary.

pub mod commands;
pub mod config;
pub mod csvio;

pub use commands::{cmd_compare, cmd_run_abm, cmd_run_ode, cmd_sweep, CliError, SweepSpec};
pub use config::{parse_config, ConfigBuilder, ConfigError, OutputFormat, RunConfig};
