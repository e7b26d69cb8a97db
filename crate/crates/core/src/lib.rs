//! Joint two-dimensional (elevation, azimuth) direction-of-arrival estimation
//! on uniform circular arrays.
//!
//! The crate covers the full desk-scale experiment pipeline:
//!
//! * [`array`] — UCA geometry, steering vectors, identifiability checks;
//! * [`signal`] — synthetic source waveforms, white and Toeplitz-colored
//!   noise, snapshot matrices, and exact (asymptotic) covariances;
//! * [`covariance`] — sample covariance, the partial cross-correlation
//!   blocks consumed by the modified propagator, and operation counters;
//! * [`estimators`] — the modified propagator (MPM) plus propagator-method
//!   (PM) and MUSIC baselines, all exposed as spatial-spectrum evaluators;
//! * [`spectrum`] — 2-D grid scan, peak extraction, optional local
//!   refinement, and CSV export;
//! * [`experiments`] — seeded Monte Carlo trials, peak-to-truth matching,
//!   RMSE/detection aggregation, parameter sweeps, and JSON summaries.
//!
//! The crate is `no_std`-compatible (requires `alloc`). File and process
//! handling lives in the companion CLI crate.
//!
//! # Features
//!
//! * `std` (default) — standard library support.
//! * `serde` (default) — JSON serialization of experiment summaries.
//! * `rayon` — parallel grid scans and Monte Carlo trials. Results are
//!   bit-identical to the sequential path.

#![cfg_attr(not(feature = "std"), no_std)]
// Validation guards are written as `!(x > 0.0)` so NaN inputs fail closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod array;
pub mod covariance;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod signal;
pub mod spectrum;

pub use array::{Direction, UcaGeometry};
pub use covariance::OpCount;
pub use error::DoaError;
pub use estimators::{EstimatorKind, SpectrumFn};
pub use experiments::{ExperimentSummary, Scenario, TrialResult};
pub use signal::{NoiseModel, SnapshotMatrix, SourceModel};
pub use spectrum::ScanGrid;

/// Convenience alias used throughout the public API.
pub type Result<T> = core::result::Result<T, DoaError>;
