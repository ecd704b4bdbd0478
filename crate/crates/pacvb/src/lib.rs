//! File formats, the parallel replication harness and the `pacvb` command.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;

pub use error::CliError;
