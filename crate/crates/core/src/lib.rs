//! Matrix-parameter stochastic optimization.
//!
//! This crate implements the Muon optimizer (orthogonalized gradient
//! momentum for matrix parameters) and the LiMuon variants that combine it
//! with STORM variance reduction and, optionally, randomized-SVD compression
//! of the momentum state. Alongside the optimizers it ships the pieces
//! needed to check them at desk scale: a self-contained dense linear algebra
//! kernel, synthetic stochastic objectives with known constants, and metrics
//! for stationarity and convergence-rate measurements.

pub mod error;
pub mod estimator;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod rsvd;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
