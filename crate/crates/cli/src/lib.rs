//! Library side of the `heatflux` command-line tool: configuration, the
//! `simulate`/`invert`/`gradcheck`/`compare` drivers and atomic output.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::CliError;
