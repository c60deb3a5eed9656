//! Command-line front end for `mcshoot-core`: configuration, output files,
//! and the verification suite.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config_file, parse_config_str, ConfigError, Mode, RunConfig};
pub use run::{run, RunError, RunSummary};
