//! Command-line front end for tensor-train option pricing: offline builds,
//! online queries, Monte Carlo comparisons and plot data.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;
