//! Propagator construction and the spatial-spectrum estimators.
//!
//! The modified propagator builds an annihilator of the array response from
//! partial covariance blocks alone. With the row partition `A = [A1; A2; A3]`
//! and invertible `R12 = A1·Rss·A2ᴴ`, `R21 = R12ᴴ`:
//!
//! ```text
//! B1 = R32·R12⁻¹  satisfies  B1·A1 = A3
//! B2 = R31·R21⁻¹  satisfies  B2·A2 = A3
//! Qᴴ = [B1 | B2 | −2I]  gives  QᴴA = 0
//! ```
//!
//! so steering vectors of the true directions are nulled and the spectrum
//! `f(θ,φ) = 1/(‖Qᴴa(θ,φ)‖² + ε)` peaks there. The PM baseline solves a
//! least-squares propagator on the leading columns of the full covariance;
//! the MUSIC baseline projects onto the noise subspace from an
//! eigendecomposition. All three evaluators share the `1/(‖W·a‖² + ε)`
//! form and differ only in the operator `W`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // f64 math comes from the trait in no_std builds
use num_traits::Float;

use crate::array::{steering_vector, Direction, UcaGeometry};
use crate::covariance::{OpCount, PartialCovariances, STAGE_EVD, STAGE_SOLVER};
use crate::error::DoaError;
use crate::Result;

/// Spectrum denominator regularizer; keeps the evaluator finite exactly at
/// annihilated directions.
pub const SPECTRUM_EPSILON: f64 = 1e-12;

/// Reciprocal-condition floor below which a covariance block is treated as
/// rank deficient (coherent sources collapse to ~1e-17; noisy-but-usable
/// blocks stay far above).
pub const SINGULARITY_RCOND: f64 = 1e-10;

/// Estimator selector used by the experiment harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EstimatorKind {
    Mpm,
    Pm,
    Music,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Mpm => "mpm",
            EstimatorKind::Pm => "pm",
            EstimatorKind::Music => "music",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mpm" => Some(EstimatorKind::Mpm),
            "pm" => Some(EstimatorKind::Pm),
            "music" => Some(EstimatorKind::Music),
            _ => None,
        }
    }
}

impl core::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The fitted annihilator `Q` (as `N×(N−2P)`), its conditioning context,
/// and the operation counts accumulated while fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    q: DMatrix<Complex64>,
    p_sources: usize,
    rcond_r12: f64,
    rcond_r21: f64,
    ops: OpCount,
}

impl Propagator {
    /// `Q`, with `QᴴA = 0` on exact inputs.
    pub fn q_matrix(&self) -> &DMatrix<Complex64> {
        &self.q
    }

    pub fn p_sources(&self) -> usize {
        self.p_sources
    }

    pub fn n_elements(&self) -> usize {
        self.q.nrows()
    }

    /// Reciprocal condition numbers of the inverted blocks.
    pub fn conditioning(&self) -> (f64, f64) {
        (self.rcond_r12, self.rcond_r21)
    }

    /// Snapshot of the counters at fit time.
    pub fn ops(&self) -> &OpCount {
        &self.ops
    }

    /// `‖Qᴴa‖/‖Q‖` for one direction; zero (to rounding) at true sources
    /// when fitted from exact covariances.
    pub fn annihilation_residual(&self, geometry: &UcaGeometry, dir: &Direction) -> f64 {
        let a = steering_vector(geometry, dir);
        let qh = self.q.adjoint();
        let mut num = 0.0;
        for r in 0..qh.nrows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..qh.ncols() {
                acc += qh[(r, c)] * a.entries()[c];
            }
            num += acc.norm_sqr();
        }
        num.sqrt() / self.q.norm()
    }
}

/// A fitted spatial-spectrum evaluator: `power = 1/(‖W·a(θ,φ)‖² + ε)`.
/// Immutable after fitting and safe to evaluate concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFn {
    operator: DMatrix<Complex64>,
    geometry: UcaGeometry,
    kind: EstimatorKind,
}

impl SpectrumFn {
    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn geometry(&self) -> &UcaGeometry {
        &self.geometry
    }

    /// The row operator `W` applied to steering vectors.
    pub fn operator(&self) -> &DMatrix<Complex64> {
        &self.operator
    }

    /// Spectrum value at a direction; strictly positive and finite.
    pub fn eval(&self, dir: &Direction) -> f64 {
        let a = steering_vector(&self.geometry, dir);
        self.eval_steering(a.entries())
    }

    /// Spectrum value from a precomputed steering vector (must come from
    /// the same geometry); the grid scanner uses this to share steering
    /// tables across estimators and trials.
    pub fn eval_steering(&self, steering: &[Complex64]) -> f64 {
        debug_assert_eq!(steering.len(), self.operator.ncols());
        let mut denom = 0.0;
        for r in 0..self.operator.nrows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, s) in steering.iter().enumerate() {
                acc += self.operator[(r, c)] * s;
            }
            denom += acc.norm_sqr();
        }
        1.0 / (denom + SPECTRUM_EPSILON)
    }
}

fn reciprocal_condition(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv[0];
    let smin = sv[sv.len() - 1];
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// Fits the modified propagator from partial covariance blocks.
///
/// `B1` and `B2` are obtained by LU solves against `R12`/`R21` (never by
/// explicit inversion); the solver cost is recorded as a nominal `2P³`
/// bucket. Rank-deficient blocks (fully coherent sources, misdeclared
/// source count) are rejected as [`DoaError::SingularBlock`].
pub fn fit_mpm(pc: &PartialCovariances, ops: &mut OpCount) -> Result<Propagator> {
    let p = pc.p_sources();
    let n = pc.n_elements();
    let m = n - 2 * p;

    let rcond_r12 = reciprocal_condition(pc.r12());
    let rcond_r21 = reciprocal_condition(pc.r21());
    let rcond = rcond_r12.min(rcond_r21);
    if !(rcond >= SINGULARITY_RCOND) {
        return Err(DoaError::SingularBlock { rcond });
    }

    // B1·R12 = R32 and B2·R21 = R31, via the adjoint systems
    // R12ᴴ·B1ᴴ = R32ᴴ and R21ᴴ·B2ᴴ = R31ᴴ (note R21ᴴ = R12).
    let b1h = pc
        .r12()
        .adjoint()
        .lu()
        .solve(&pc.r32().adjoint())
        .ok_or(DoaError::SingularBlock { rcond })?;
    let b2h = pc
        .r12()
        .clone()
        .lu()
        .solve(&pc.r31().adjoint())
        .ok_or(DoaError::SingularBlock { rcond })?;

    let mut qh = DMatrix::<Complex64>::zeros(m, n);
    qh.view_mut((0, 0), (m, p)).copy_from(&b1h.adjoint());
    qh.view_mut((0, p), (m, p)).copy_from(&b2h.adjoint());
    for i in 0..m {
        qh[(i, 2 * p + i)] = Complex64::new(-2.0, 0.0);
    }

    let cube = (p * p * p) as u64;
    ops.record(STAGE_SOLVER, 2 * cube, 2 * cube);

    Ok(Propagator {
        q: qh.adjoint(),
        p_sources: p,
        rcond_r12,
        rcond_r21,
        ops: ops.clone(),
    })
}

/// Spectrum evaluator for a fitted modified propagator.
pub fn mpm_spectrum(prop: &Propagator, geometry: &UcaGeometry) -> Result<SpectrumFn> {
    if geometry.n_elements() != prop.n_elements() {
        return Err(DoaError::invalid(
            "geometry element count does not match the propagator",
        ));
    }
    Ok(SpectrumFn {
        operator: prop.q_matrix().adjoint(),
        geometry: geometry.clone(),
        kind: EstimatorKind::Mpm,
    })
}

/// Classic propagator-method baseline on the full covariance.
///
/// Partitions the columns of `R` as `[G1 | G2]` with `G1` the first `P`
/// columns and solves the least-squares propagator `min‖G1·Π − G2‖`; the
/// spectrum operator is `[Πᴴ | −I]`. Uses every entry of `R`, so a uniform
/// noise floor contaminates the fit (contrast with [`fit_mpm`]).
pub fn fit_pm(
    rxx: &DMatrix<Complex64>,
    p_sources: usize,
    geometry: &UcaGeometry,
    ops: &mut OpCount,
) -> Result<SpectrumFn> {
    let n = rxx.nrows();
    if rxx.ncols() != n || n != geometry.n_elements() {
        return Err(DoaError::invalid(
            "covariance shape does not match the geometry",
        ));
    }
    if p_sources == 0 || p_sources >= n {
        return Err(DoaError::invalid("the propagator method needs 0 < P < N"));
    }

    let p = p_sources;
    let g1 = rxx.columns(0, p).into_owned();
    let g2 = rxx.columns(p, n - p).into_owned();

    let rcond = reciprocal_condition(&g1);
    if !(rcond >= SINGULARITY_RCOND) {
        return Err(DoaError::SingularBlock { rcond });
    }
    let svd = g1.svd(true, true);
    let pi = svd
        .solve(&g2, SINGULARITY_RCOND)
        .map_err(DoaError::NumericalFailure)?;

    let mut operator = DMatrix::<Complex64>::zeros(n - p, n);
    operator
        .view_mut((0, 0), (n - p, p))
        .copy_from(&pi.adjoint());
    for i in 0..n - p {
        operator[(i, p + i)] = Complex64::new(-1.0, 0.0);
    }

    let cube = (p * p * p) as u64;
    ops.record(STAGE_SOLVER, cube, cube);

    Ok(SpectrumFn {
        operator,
        geometry: geometry.clone(),
        kind: EstimatorKind::Pm,
    })
}

/// Spectral MUSIC baseline: Hermitian eigendecomposition, noise subspace
/// from the `N−P` smallest eigenvalues, spectrum `1/(‖Enᴴa‖² + ε)`. The
/// decomposition cost is recorded as a nominal `N³` bucket.
pub fn fit_music(
    rxx: &DMatrix<Complex64>,
    p_sources: usize,
    geometry: &UcaGeometry,
    ops: &mut OpCount,
) -> Result<SpectrumFn> {
    let n = rxx.nrows();
    if rxx.ncols() != n || n != geometry.n_elements() {
        return Err(DoaError::invalid(
            "covariance shape does not match the geometry",
        ));
    }
    if p_sources == 0 || p_sources >= n {
        return Err(DoaError::invalid("MUSIC needs 0 < P < N"));
    }

    let eig =
        rxx.clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(DoaError::NumericalFailure(
                "eigendecomposition did not converge",
            ))?;

    // Ascending eigenvalue order with a deterministic index tie-break.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let m = n - p_sources;
    let mut noise_basis = DMatrix::<Complex64>::zeros(n, m);
    for (col, &idx) in order[..m].iter().enumerate() {
        noise_basis.set_column(col, &eig.eigenvectors.column(idx));
    }

    let cube = (n * n * n) as u64;
    ops.record(STAGE_EVD, cube, cube);

    Ok(SpectrumFn {
        operator: noise_basis.adjoint(),
        geometry: geometry.clone(),
        kind: EstimatorKind::Music,
    })
}
