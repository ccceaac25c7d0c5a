//! Command-line front end for `spade_core`: JSON configs in, CSV and JSON
//! out.
//!
//! Subcommands: `entropy-sweep` (entropy tables and the advantage contour),
//! `simulate` (calibrate, sweep and report error rates), `test` (apply the
//! threshold test to a counts file) and `estimate-crosstalk`.

pub mod commands;
pub mod config;
pub mod counts;
pub mod error;
pub mod output;

pub use error::{CliError, CliResult};
