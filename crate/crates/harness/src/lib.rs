//! Command-line front end for the spin-chain simulator: TOML run
//! configuration, CSV outputs with checksummed manifests, and the
//! `simulate | optimize | scan | filter | report` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
