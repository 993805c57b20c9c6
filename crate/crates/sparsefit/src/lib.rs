//! Command-line front end, file formats and the parallel driver for
//! `sparsefit-core`.

pub mod cli;
pub mod config;
pub mod data;
pub mod driver;
pub mod error;
pub mod report;

pub use error::{CliError, CliResult};
