//! Command-line front end for `deepkm`: argument and config-file parsing,
//! dataset selection, and JSON/TSV emission of run reports.

pub mod args;
pub mod config;
pub mod dataset;
pub mod emit;
pub mod error;
pub mod project;

mod commands;

pub use args::{parse_cli, Invocation, Mode, Truth};
pub use commands::{execute, read_labels, Outcome};
pub use config::ExperimentFile;
pub use error::{CliError, Result};
