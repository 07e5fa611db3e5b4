//! Subcommands and end-to-end pipelines behind the `mmhate` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod features;
pub mod manifest;
pub mod pipeline;

pub use error::CliError;
