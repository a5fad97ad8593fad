//! File formats, experiment configuration and the run harness behind the
//! `distill` command-line tool.

pub mod config;
mod error;
pub mod formats;
pub mod harness;

pub use config::{ExperimentConfig, Overrides};
pub use error::HarnessError;
