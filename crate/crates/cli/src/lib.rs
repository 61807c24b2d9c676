//! Experiment runner: TOML configuration, cached discretizations, CSV and
//! JSON outputs with a checksummed manifest.

pub mod config;
pub mod runner;

pub use config::{CachePolicy, ConfigError, Experiment, RunConfig};
pub use runner::{report, run, CliError, RunOptions, RunSummary, CACHE_ENV};
