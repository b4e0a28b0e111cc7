//! Command-line benchmark harness for the LiMuon optimizers: experiment
//! configuration, deterministic execution, sweeps across variants and
//! horizons, and machine-readable result emission.

pub mod config;
pub mod csvio;
pub mod error;
pub mod report;
pub mod runner;

pub use config::ExperimentSpec;
pub use error::HarnessError;
