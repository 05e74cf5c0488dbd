//! Command-line driver for the timbre-alignment benchmark: configuration, the pipeline
//! commands, report generation, and the fixture embedder used for end-to-end testing.

pub mod config;
pub mod error;
pub mod fixture;
pub mod pipeline;
pub mod report;
pub mod tables;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
