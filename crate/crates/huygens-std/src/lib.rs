//! File formats, configuration and the command-line frontend for
//! [`huygens_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod io;
pub mod svg;

pub use error::{CliError, CliResult};
