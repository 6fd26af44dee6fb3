//! Library side of the `infodemic` command-line tool: configuration,
//! subcommand drivers and SVG rendering.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use config::{Format, RunConfig};
pub use error::CliError;
