//! Command-line front end: configuration layering, the four subcommands, and the
//! transcript, rate-table and report file formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{attack, keyrate, simulate, verify, CommandOutput};
pub use config::{Format, Overrides, RunConfig};
pub use error::CliError;
