//! Command-line front end of the `nnjscc-core` simulator: configuration
//! files, parallel execution and output formats.

pub mod commands;
pub mod config;
mod error;
pub mod output;
pub mod runner;

pub use error::{AppError, AppResult};
pub use nnjscc_core as core;
