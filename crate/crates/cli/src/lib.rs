//! Library side of the `slimrnn` command: checkpoints, run manifests and
//! the subcommand implementations.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod manifest;

pub use error::{CliError, CliResult};
