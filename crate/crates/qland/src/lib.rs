//! File formats, configuration and the command-line experiments built on
//! `qland-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod runner;

pub use error::{CliError, Result};
