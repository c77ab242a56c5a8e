//! Command-line driver: configuration loading and the pipeline stages.

pub mod commands;
pub mod config;

pub use commands::{Dirs, StudyKind};
pub use config::{Overrides, RunConfig};
