//! Command-line pipeline for few-mode fiber delay line design.
//!
//! Stages exchange CSV files, so an externally supplied mode table can
//! drive the designer without the mode solver.

pub mod config;
mod output;
pub mod pipeline;

pub use config::{parse_config, validate, Cli, Command, ConfigError, RunConfig};
pub use output::write_atomic;
pub use pipeline::{run_pipeline, RunSummary, StageError};
