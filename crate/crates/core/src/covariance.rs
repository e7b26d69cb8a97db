//! Sample covariance, partial cross-correlation blocks, and operation
//! counters.
//!
//! The modified propagator never forms the full `N×N` covariance. It only
//! needs three off-diagonal blocks of `R = E{X Xᴴ}` under the row partition
//! `1..P | P+1..2P | 2P+1..N`:
//!
//! ```text
//! R12 = (1/K)·X[1..P]     · X[P+1..2P]ᴴ      (P×P)
//! R31 = (1/K)·X[2P+1..N]  · X[1..P]ᴴ         ((N−2P)×P)
//! R32 = (1/K)·X[2P+1..N]  · X[P+1..2P]ᴴ      ((N−2P)×P)
//! ```
//!
//! Spatially white noise contributes only to the diagonal of the full
//! covariance, so these blocks are exactly noise-free in expectation —
//! the structural reason the method ignores uniform noise.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::DoaError;
use crate::signal::SnapshotMatrix;
use crate::Result;

/// Multiply/add counters, bucketed by pipeline stage.
///
/// Covariance-stage counts are exact complex multiply-accumulate tallies
/// (one multiply and one add per accumulation). Solver and
/// eigendecomposition stages are recorded as nominal cubic buckets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpCount {
    stages: Vec<OpStage>,
}

/// One labelled counter bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpStage {
    pub label: &'static str,
    pub complex_multiplies: u64,
    pub complex_adds: u64,
}

impl OpCount {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accumulates counts into the stage with the given label.
    pub fn record(&mut self, label: &'static str, multiplies: u64, adds: u64) {
        if let Some(stage) = self.stages.iter_mut().find(|s| s.label == label) {
            stage.complex_multiplies += multiplies;
            stage.complex_adds += adds;
        } else {
            self.stages.push(OpStage {
                label,
                complex_multiplies: multiplies,
                complex_adds: adds,
            });
        }
    }

    pub fn stages(&self) -> &[OpStage] {
        &self.stages
    }

    pub fn multiplies(&self, label: &str) -> u64 {
        self.stages
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.complex_multiplies)
            .sum()
    }

    pub fn total_multiplies(&self) -> u64 {
        self.stages.iter().map(|s| s.complex_multiplies).sum()
    }

    pub fn total_adds(&self) -> u64 {
        self.stages.iter().map(|s| s.complex_adds).sum()
    }
}

/// The covariance stage label shared by all estimators.
pub const STAGE_COVARIANCE: &str = "covariance";
/// Linear-system stage recorded by the propagator fits.
pub const STAGE_SOLVER: &str = "solver";
/// Eigendecomposition stage recorded by MUSIC.
pub const STAGE_EVD: &str = "evd";

/// The partial cross-correlation blocks consumed by the modified propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCovariances {
    r12: DMatrix<Complex64>,
    r21: DMatrix<Complex64>,
    r31: DMatrix<Complex64>,
    r32: DMatrix<Complex64>,
    p_sources: usize,
    n_elements: usize,
}

impl PartialCovariances {
    fn from_blocks(
        r12: DMatrix<Complex64>,
        r31: DMatrix<Complex64>,
        r32: DMatrix<Complex64>,
        p_sources: usize,
        n_elements: usize,
    ) -> Self {
        // R21 is the Hermitian transpose of R12 by construction, never a
        // second estimate.
        let r21 = r12.adjoint();
        Self {
            r12,
            r21,
            r31,
            r32,
            p_sources,
            n_elements,
        }
    }

    pub fn r12(&self) -> &DMatrix<Complex64> {
        &self.r12
    }

    pub fn r21(&self) -> &DMatrix<Complex64> {
        &self.r21
    }

    pub fn r31(&self) -> &DMatrix<Complex64> {
        &self.r31
    }

    pub fn r32(&self) -> &DMatrix<Complex64> {
        &self.r32
    }

    pub fn p_sources(&self) -> usize {
        self.p_sources
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }
}

fn check_partition(n: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(DoaError::invalid("at least one source is required"));
    }
    // N - 2P >= 2 (the element-count assumption N >= 2P + 2).
    if n < 2 * p + 2 {
        return Err(DoaError::InsufficientElements {
            n_elements: n,
            p_sources: p,
        });
    }
    Ok(())
}

/// Sample covariance `(1/K)·Σ x_t x_tᴴ`, with exact Hermitian symmetry
/// enforced by averaging with its adjoint.
pub fn sample_covariance(x: &SnapshotMatrix) -> DMatrix<Complex64> {
    let k = x.n_snapshots() as f64;
    let raw = x.samples() * x.samples().adjoint() / Complex64::new(k, 0.0);
    (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0)
}

/// [`sample_covariance`] with its `N²K` multiply-accumulate cost recorded
/// under [`STAGE_COVARIANCE`].
pub fn sample_covariance_counted(x: &SnapshotMatrix, ops: &mut OpCount) -> DMatrix<Complex64> {
    let n = x.n_elements() as u64;
    let k = x.n_snapshots() as u64;
    ops.record(STAGE_COVARIANCE, n * n * k, n * n * k);
    sample_covariance(x)
}

/// Estimates only the three partial blocks, never forming the full `N×N`
/// covariance. Records exactly `K·(P² + 2·(N−2P)·P)` multiply-accumulates.
pub fn partial_covariances(
    x: &SnapshotMatrix,
    p_sources: usize,
    ops: &mut OpCount,
) -> Result<PartialCovariances> {
    let n = x.n_elements();
    let k = x.n_snapshots();
    check_partition(n, p_sources)?;

    let p = p_sources;
    let m = n - 2 * p;
    let inv_k = Complex64::new(1.0 / k as f64, 0.0);
    let top = x.samples().rows(0, p);
    let mid = x.samples().rows(p, p);
    let bottom = x.samples().rows(2 * p, m);

    let r12 = (top * mid.adjoint()) * inv_k;
    let r31 = (bottom * top.adjoint()) * inv_k;
    let r32 = (bottom * mid.adjoint()) * inv_k;

    let macs = (k * (p * p + 2 * m * p)) as u64;
    ops.record(STAGE_COVARIANCE, macs, macs);

    Ok(PartialCovariances::from_blocks(r12, r31, r32, p, n))
}

/// Slices the same index blocks out of a full covariance matrix; drives
/// noiseless/asymptotic oracle paths. The input must be Hermitian.
pub fn partial_from_exact(
    rxx: &DMatrix<Complex64>,
    p_sources: usize,
) -> Result<PartialCovariances> {
    let n = rxx.nrows();
    if rxx.ncols() != n {
        return Err(DoaError::invalid("covariance matrix must be square"));
    }
    check_partition(n, p_sources)?;

    let p = p_sources;
    let m = n - 2 * p;
    let r12 = rxx.view((0, p), (p, p)).into_owned();
    let r31 = rxx.view((2 * p, 0), (m, p)).into_owned();
    let r32 = rxx.view((2 * p, p), (m, p)).into_owned();
    Ok(PartialCovariances::from_blocks(r12, r31, r32, p, n))
}
