//! Command-line harness around `spinmetro_core`: configuration, single-point
//! and sweep evaluation, figure datasets and the validation suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod records;
pub mod validate;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use records::Record;
