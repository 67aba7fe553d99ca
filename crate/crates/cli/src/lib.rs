//! Command-line front end for `phononcp`.
//!
//! A run is driven by one TOML file ([`config::RunConfig`]); every field has
//! a default, so an empty file or no file at all is a valid run. Designed
//! pulses are kept in a content-addressed library ([`library`]) below the
//! output directory and can be re-evaluated, swept or reused for
//! thermometry by id.
//!
//! Exit codes: 0 success, 2 input error, 3 optimization failure, 4
//! ill-conditioned population correction.

pub mod commands;
pub mod config;
pub mod error;
pub mod library;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
