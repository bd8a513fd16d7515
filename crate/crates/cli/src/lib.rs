//! Command-line front end: corpus evaluation, τ sweeps, synthetic mixtures,
//! generation runs and format conversion.
//!
//! Exit codes: 0 on success, 1 when the input data is invalid, 2 for I/O or
//! configuration problems.

pub mod commands;
pub mod error;
pub mod pipeline;
pub mod report;

pub use commands::run;
pub use error::{CliError, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
