//! Configuration, file formats, run records and the command implementations
//! behind the `afmhyst` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod record;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use record::RunRecord;
