//! Command-line front end: CSV ingestion, TOML configuration, and JSON/CSV
//! reports for fitting, simulation and residual diagnostics.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod report;

pub use config::{FitConfig, MethodConfig, OutputFormat, SimulateConfig, TermSpec};
pub use error::{CliError, CliResult};
pub use input::{load_csv, LoadedCsv};
pub use report::FitReport;
