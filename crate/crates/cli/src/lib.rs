//! Command-line front end: the `.sst` file format and the `sst` subcommands.

pub mod commands;
pub mod format;
pub mod parallel;

pub use commands::run;
pub use format::{parse, serialize, FormatError, SstDocument};
