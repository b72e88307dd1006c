//! Command-line front end: subcommands, configuration, logging and the
//! cached pipeline runner.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod io;
pub mod logging;
pub mod pipeline;

pub use commands::{run, Cli};
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
