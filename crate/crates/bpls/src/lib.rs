//! File formats, configuration, the benchmark harness and the command-line
//! interface around `bpls-core`.

pub mod artifact;
pub mod benchmark;
pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod manifest;
pub mod table;

pub use error::{CliError, Result};
