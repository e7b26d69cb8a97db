//! Synthetic narrowband sources, spatial noise models, and snapshot
//! synthesis.
//!
//! A snapshot matrix is `X = A·S + N` with `A` the array response, `S` the
//! `P×K` source waveforms (i.i.d. circular complex Gaussian) and `N` the
//! spatially-shaped noise. White noise has covariance `σ²I`; colored noise
//! is shaped by the lower Cholesky factor of a symmetric positive definite
//! Toeplitz matrix, giving covariance `σ²·T` (per-element variance `σ²`
//! when the Toeplitz first row starts at 1).
//!
//! All randomness flows through a caller-provided ChaCha stream, so equal
//! seeds reproduce snapshot matrices bit for bit.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // f64 math comes from the trait in no_std builds
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{array_response, Direction, UcaGeometry};
use crate::error::DoaError;
use crate::Result;

/// Source coherence structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coherence {
    /// Statistically independent waveforms (diagonal source covariance).
    Independent,
    /// Listed index pairs share a single underlying waveform.
    CoherentPairs(Vec<(usize, usize)>),
}

/// `P` sources: directions, per-source powers, and coherence structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    directions: Vec<Direction>,
    powers: Vec<f64>,
    coherence: Coherence,
    power_jitter: f64,
}

impl SourceModel {
    /// Independent unit-power sources.
    pub fn unit_power(directions: Vec<Direction>) -> Result<Self> {
        let powers = alloc::vec![1.0; directions.len()];
        Self::new(directions, powers, Coherence::Independent)
    }

    pub fn new(directions: Vec<Direction>, powers: Vec<f64>, coherence: Coherence) -> Result<Self> {
        if directions.is_empty() {
            return Err(DoaError::invalid("at least one source is required"));
        }
        for (i, a) in directions.iter().enumerate() {
            for b in directions.iter().skip(i + 1) {
                if a == b {
                    return Err(DoaError::DegenerateDirections);
                }
            }
        }
        if powers.len() != directions.len() {
            return Err(DoaError::invalid(
                "powers length must match directions length",
            ));
        }
        if powers.iter().any(|&p| !(p >= 0.0)) {
            return Err(DoaError::invalid("source powers must be nonnegative"));
        }
        if let Coherence::CoherentPairs(pairs) = &coherence {
            for &(i, j) in pairs {
                if i == j || i >= directions.len() || j >= directions.len() {
                    return Err(DoaError::invalid("coherent pair indices out of range"));
                }
            }
        }
        Ok(Self {
            directions,
            powers,
            coherence,
            power_jitter: 0.0,
        })
    }

    /// Enables a per-synthesis relative power perturbation in
    /// `[1-jitter, 1+jitter]`, for "almost equipowered" studies. Off (0) by
    /// default so runs stay exactly equipowered.
    pub fn with_power_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&jitter) {
            return Err(DoaError::invalid("power jitter must lie in [0, 1)"));
        }
        self.power_jitter = jitter;
        Ok(self)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn coherence(&self) -> &Coherence {
        &self.coherence
    }

    pub fn power_jitter(&self) -> f64 {
        self.power_jitter
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.powers.len() as f64
    }

    /// Representative waveform index per source: sources in the same
    /// coherence group map to the smallest index of the group.
    pub(crate) fn waveform_roots(&self) -> Vec<usize> {
        let p = self.len();
        let mut root: Vec<usize> = (0..p).collect();
        if let Coherence::CoherentPairs(pairs) = &self.coherence {
            fn find(root: &mut [usize], mut i: usize) -> usize {
                while root[i] != i {
                    root[i] = root[root[i]];
                    i = root[i];
                }
                i
            }
            for &(a, b) in pairs {
                let (ra, rb) = (find(&mut root, a), find(&mut root, b));
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                root[hi] = lo;
            }
            for i in 0..p {
                root[i] = find(&mut root, i);
            }
        }
        root
    }

    /// Source covariance: diagonal powers, with `sqrt(p_i·p_j)` cross terms
    /// inside coherence groups (rank deficient when pairs are present).
    pub fn source_covariance(&self) -> DMatrix<Complex64> {
        let p = self.len();
        let roots = self.waveform_roots();
        DMatrix::from_fn(p, p, |i, j| {
            if roots[i] == roots[j] {
                Complex64::new((self.powers[i] * self.powers[j]).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Spatial noise shape.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// Spatially white: covariance `σ²·I`.
    Awgn,
    /// Symmetric Toeplitz covariance `σ²·Toeplitz(first_row)`.
    Toeplitz { first_row: Vec<f64> },
}

/// A noise model: a spatial shape plus a baseline per-element variance used
/// when no SNR constraint applies (e.g. noise-only synthesis).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    variance: f64,
}

impl NoiseModel {
    pub fn awgn(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(DoaError::BadNoiseCovariance(String::from(
                "variance must be nonnegative",
            )));
        }
        Ok(Self {
            kind: NoiseKind::Awgn,
            variance,
        })
    }

    /// Toeplitz-colored noise. The first row must describe a symmetric
    /// positive definite matrix; this is checked here via a Cholesky
    /// factorization.
    pub fn toeplitz(variance: f64, first_row: Vec<f64>) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(DoaError::BadNoiseCovariance(String::from(
                "variance must be nonnegative",
            )));
        }
        if first_row.len() < 2 {
            return Err(DoaError::BadNoiseCovariance(String::from(
                "first row needs at least 2 lags",
            )));
        }
        if !(first_row[0] > 0.0) {
            return Err(DoaError::BadNoiseCovariance(String::from(
                "first row must start positive",
            )));
        }
        let t = toeplitz_matrix(&first_row);
        if t.clone().cholesky().is_none() {
            return Err(DoaError::BadNoiseCovariance(String::from(
                "Toeplitz matrix is not positive definite",
            )));
        }
        Ok(Self {
            kind: NoiseKind::Toeplitz { first_row },
            variance,
        })
    }

    /// Toeplitz noise with the default linear-ramp first row for `n` lags.
    pub fn toeplitz_ramp(variance: f64, n: usize) -> Result<Self> {
        Self::toeplitz(variance, toeplitz_ramp_first_row(n)?)
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn is_colored(&self) -> bool {
        matches!(self.kind, NoiseKind::Toeplitz { .. })
    }

    /// Spatial covariance scaled so each diagonal entry equals
    /// `per_element_variance`.
    pub fn spatial_covariance(&self, n: usize, per_element_variance: f64) -> Result<DMatrix<f64>> {
        match &self.kind {
            NoiseKind::Awgn => Ok(DMatrix::identity(n, n) * per_element_variance),
            NoiseKind::Toeplitz { first_row } => {
                if first_row.len() != n {
                    return Err(DoaError::BadNoiseCovariance(alloc::format!(
                        "Toeplitz first row has {} lags, array has {} elements",
                        first_row.len(),
                        n
                    )));
                }
                Ok(toeplitz_matrix(first_row) * (per_element_variance / first_row[0]))
            }
        }
    }
}

/// The default colored-noise first row: a linear ramp from 1.0 down to 0.1
/// inclusive, i.e. entry `i = 1 − 0.9·i/(n−1)`. Evaluated in interpolation
/// form so both endpoints are exact.
pub fn toeplitz_ramp_first_row(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(DoaError::invalid(
            "a Toeplitz first row needs at least 2 lags",
        ));
    }
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (1.0 - t) + t * 0.1
        })
        .collect())
}

/// Alternate colored-noise first row with a fixed decrement per lag
/// (entry `i = 1 − step·i`). All entries must stay positive.
pub fn toeplitz_step_first_row(n: usize, step: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(DoaError::invalid(
            "a Toeplitz first row needs at least 2 lags",
        ));
    }
    if !(step > 0.0) || 1.0 - step * (n - 1) as f64 <= 0.0 {
        return Err(DoaError::invalid(
            "step must be positive and keep all lags positive",
        ));
    }
    Ok((0..n).map(|i| 1.0 - step * i as f64).collect())
}

fn toeplitz_matrix(first_row: &[f64]) -> DMatrix<f64> {
    let n = first_row.len();
    DMatrix::from_fn(n, n, |i, j| first_row[i.abs_diff(j)])
}

/// `N×K` complex baseband samples plus the geometry they were taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    samples: DMatrix<Complex64>,
    geometry: UcaGeometry,
}

impl SnapshotMatrix {
    pub fn new(geometry: UcaGeometry, samples: DMatrix<Complex64>) -> Result<Self> {
        if samples.nrows() != geometry.n_elements() {
            return Err(DoaError::invalid(
                "sample rows must match the element count",
            ));
        }
        if samples.ncols() == 0 {
            return Err(DoaError::invalid("at least one snapshot is required"));
        }
        Ok(Self { samples, geometry })
    }

    pub fn samples(&self) -> &DMatrix<Complex64> {
        &self.samples
    }

    pub fn geometry(&self) -> &UcaGeometry {
        &self.geometry
    }

    pub fn n_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.samples.ncols()
    }

    /// Returns a copy with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            samples: self.samples.map(|v| v * factor),
            geometry: self.geometry.clone(),
        }
    }
}

/// Per-element noise variance implied by the SNR convention
/// `SNR_dB = 10·log10(σ_s²/σ_N²)`, with `σ_s²` the mean per-source power.
/// An infinite SNR means noiseless; with no sources the model's baseline
/// variance applies.
pub fn per_element_noise_variance(sources: &SourceModel, noise: &NoiseModel, snr_db: f64) -> f64 {
    if sources.is_empty() || snr_db.is_nan() {
        return noise.variance();
    }
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    sources.mean_power() * 10f64.powf(-snr_db / 10.0)
}

/// Synthesizes `X = A·S + N` deterministically from a seed. Equal seeds and
/// parameters reproduce the matrix bit for bit; `stream` selects an
/// independent substream of the same seed (used for Monte Carlo trials).
pub fn synthesize_snapshots(
    geometry: &UcaGeometry,
    sources: &SourceModel,
    noise: &NoiseModel,
    k: usize,
    snr_db: f64,
    seed: u64,
) -> Result<SnapshotMatrix> {
    let mut rng = snapshot_rng(seed, 0);
    synthesize_snapshots_with(geometry, sources, noise, k, snr_db, &mut rng)
}

/// The ChaCha stream used by [`synthesize_snapshots`]; trial `t` of an
/// experiment draws from `snapshot_rng(seed, t)`.
pub fn snapshot_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Synthesis on an explicit RNG. Draw order is fixed: optional power
/// jitter, then one waveform per coherence group (group-major), then the
/// white noise matrix (snapshot-major), so outputs are reproducible.
pub fn synthesize_snapshots_with<R: Rng>(
    geometry: &UcaGeometry,
    sources: &SourceModel,
    noise: &NoiseModel,
    k: usize,
    snr_db: f64,
    rng: &mut R,
) -> Result<SnapshotMatrix> {
    if k == 0 {
        return Err(DoaError::invalid("at least one snapshot is required"));
    }
    let n = geometry.n_elements();
    let p = sources.len();
    let a = array_response(geometry, sources.directions())?;

    let mut powers: Vec<f64> = sources.powers().to_vec();
    if sources.power_jitter() > 0.0 {
        for power in &mut powers {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            *power *= 1.0 + sources.power_jitter() * u;
        }
    }

    // One waveform per coherence group, shared by its members.
    let roots = sources.waveform_roots();
    let mut group_waveforms: Vec<Option<Vec<Complex64>>> = alloc::vec![None; p];
    for &root in &roots {
        if group_waveforms[root].is_none() {
            group_waveforms[root] = Some((0..k).map(|_| draw_unit_complex(rng)).collect());
        }
    }

    let signal = DMatrix::from_fn(p, k, |s, t| {
        let w = group_waveforms[roots[s]]
            .as_ref()
            .expect("group waveform present");
        w[t] * powers[s].sqrt()
    });
    let mut x = a.matrix() * signal;

    let sigma2 = per_element_noise_variance(sources, noise, snr_db);
    if sigma2 > 0.0 {
        let mut white = Vec::with_capacity(n * k);
        for _ in 0..k {
            for _ in 0..n {
                white.push(draw_unit_complex(rng));
            }
        }
        let white = DMatrix::from_vec(n, k, white);
        let cov = noise.spatial_covariance(n, sigma2)?;
        let shaped = match noise.kind() {
            NoiseKind::Awgn => white * Complex64::new(sigma2.sqrt(), 0.0),
            NoiseKind::Toeplitz { .. } => {
                let chol = cov.cholesky().ok_or_else(|| {
                    DoaError::BadNoiseCovariance(String::from(
                        "covariance lost positive definiteness",
                    ))
                })?;
                chol.l().map(|v| Complex64::new(v, 0.0)) * white
            }
        };
        x += shaped;
    } else {
        // Keep the noise covariance validated even in the noiseless limit.
        noise.spatial_covariance(n, 0.0)?;
    }

    SnapshotMatrix::new(geometry.clone(), x)
}

/// Asymptotic covariance `A·Rss·Aᴴ + Rn` with no sampling error; the
/// oracle counterpart of [`synthesize_snapshots`].
pub fn exact_covariance(
    geometry: &UcaGeometry,
    sources: Option<&SourceModel>,
    noise: &NoiseModel,
    snr_db: f64,
) -> Result<DMatrix<Complex64>> {
    let n = geometry.n_elements();
    let mut rxx = DMatrix::<Complex64>::zeros(n, n);
    let sigma2 = match sources {
        Some(s) if !s.is_empty() => {
            let a = array_response(geometry, s.directions())?;
            rxx = a.matrix() * s.source_covariance() * a.matrix().adjoint();
            // Enforce exact Hermitian symmetry.
            rxx = (&rxx + rxx.adjoint()) * Complex64::new(0.5, 0.0);
            per_element_noise_variance(s, noise, snr_db)
        }
        _ => noise.variance(),
    };
    let rn = noise.spatial_covariance(n, sigma2)?;
    for i in 0..n {
        for j in 0..n {
            rxx[(i, j)] += Complex64::new(rn[(i, j)], 0.0);
        }
    }
    Ok(rxx)
}

fn draw_unit_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_geometry() -> UcaGeometry {
        UcaGeometry::from_carrier(14, 0.38, 900e6).unwrap()
    }

    fn reference_sources() -> SourceModel {
        SourceModel::unit_power(alloc::vec![
            Direction::from_degrees(15.0, 20.0).unwrap(),
            Direction::from_degrees(30.0, 44.0).unwrap(),
            Direction::from_degrees(66.0, 69.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn ramp_endpoints_are_exact() {
        assert_eq!(toeplitz_ramp_first_row(2).unwrap(), alloc::vec![1.0, 0.1]);
        let row = toeplitz_ramp_first_row(14).unwrap();
        assert_eq!(row[0], 1.0);
        assert_eq!(row[13], 0.1);
        // Entry i tracks 1 - 0.9*i/13; the printed two-decimal prefix of the
        // n=14 ramp is 0.93, 0.86, ...
        for (i, &v) in row.iter().enumerate() {
            assert_abs_diff_eq!(v, 1.0 - 0.9 * i as f64 / 13.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(row[1], 0.93076923, epsilon = 1e-8);
        assert_abs_diff_eq!(row[2], 0.86153846, epsilon = 1e-8);
        assert!(toeplitz_ramp_first_row(1).is_err());
    }

    #[test]
    fn ramp_at_n10_steps_by_exactly_point_one() {
        let row = toeplitz_ramp_first_row(10).unwrap();
        for (i, &v) in row.iter().enumerate() {
            assert_abs_diff_eq!(v, 1.0 - 0.1 * i as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn step_row_variant() {
        let row = toeplitz_step_first_row(14, 0.07).unwrap();
        assert_eq!(row[0], 1.0);
        assert_abs_diff_eq!(row[13], 0.09, epsilon = 1e-12);
        assert!(toeplitz_step_first_row(14, 0.08).is_err()); // last lag would go nonpositive
        assert!(NoiseModel::toeplitz(1.0, row).is_ok());
    }

    #[test]
    fn toeplitz_requires_positive_definiteness() {
        // Constant row => singular matrix.
        assert!(matches!(
            NoiseModel::toeplitz(1.0, alloc::vec![1.0, 1.0, 1.0]),
            Err(DoaError::BadNoiseCovariance(_))
        ));
        assert!(NoiseModel::toeplitz_ramp(1.0, 14).is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let geom = reference_geometry();
        let sources = reference_sources();
        let noise = NoiseModel::awgn(1.0).unwrap();
        let a = synthesize_snapshots(&geom, &sources, &noise, 50, 10.0, 7).unwrap();
        let b = synthesize_snapshots(&geom, &sources, &noise, 50, 10.0, 7).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = synthesize_snapshots(&geom, &sources, &noise, 50, 10.0, 8).unwrap();
        assert_ne!(a.samples(), c.samples());
        // Distinct streams of one seed are independent but reproducible.
        let mut r1 = snapshot_rng(7, 3);
        let mut r2 = snapshot_rng(7, 3);
        let d = synthesize_snapshots_with(&geom, &sources, &noise, 50, 10.0, &mut r1).unwrap();
        let e = synthesize_snapshots_with(&geom, &sources, &noise, 50, 10.0, &mut r2).unwrap();
        assert_eq!(d.samples(), e.samples());
        assert_ne!(a.samples(), d.samples());
    }

    #[test]
    fn noiseless_single_boresight_source_gives_constant_columns() {
        let geom = reference_geometry();
        let sources =
            SourceModel::unit_power(alloc::vec![Direction::from_degrees(0.0, 10.0).unwrap()])
                .unwrap();
        let noise = NoiseModel::awgn(0.0).unwrap();
        let x = synthesize_snapshots(&geom, &sources, &noise, 1, f64::INFINITY, 3).unwrap();
        // Boresight steering vector is all ones, so the column is constant.
        let first = x.samples()[(0, 0)];
        for m in 0..14 {
            assert_abs_diff_eq!((x.samples()[(m, 0)] - first).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn coherent_pair_shares_one_waveform() {
        let dirs = alloc::vec![
            Direction::from_degrees(15.0, 20.0).unwrap(),
            Direction::from_degrees(30.0, 44.0).unwrap(),
        ];
        let sources = SourceModel::new(
            dirs,
            alloc::vec![1.0, 4.0],
            Coherence::CoherentPairs(alloc::vec![(0, 1)]),
        )
        .unwrap();
        assert_eq!(sources.waveform_roots(), alloc::vec![0, 0]);
        let rss = sources.source_covariance();
        assert_abs_diff_eq!(rss[(0, 1)].re, 2.0, epsilon = 1e-15);
        // Rank 1: second singular value vanishes.
        let sv = rss.singular_values();
        assert!(sv[1] < 1e-12 * sv[0]);
    }

    #[test]
    fn exact_covariance_hermitian_psd() {
        let geom = reference_geometry();
        let sources = reference_sources();
        let noise = NoiseModel::toeplitz_ramp(1.0, 14).unwrap();
        let rxx = exact_covariance(&geom, Some(&sources), &noise, 10.0).unwrap();
        let herm_gap = (&rxx - rxx.adjoint()).norm();
        assert!(herm_gap < 1e-12);
        let eigs = rxx.clone().symmetric_eigen().eigenvalues;
        assert!(eigs.iter().all(|&e| e > -1e-12), "{eigs:?}");
    }

    #[test]
    fn exact_covariance_diagonal_is_total_power() {
        // Unit-modulus steering rows give |a_m|^2 = 1 per source, so each
        // diagonal entry is P + sigma^2 for white noise and unit powers.
        let geom = reference_geometry();
        let sources = reference_sources();
        let noise = NoiseModel::awgn(1.0).unwrap();
        let snr_db = 10.0;
        let sigma2 = per_element_noise_variance(&sources, &noise, snr_db);
        let rxx = exact_covariance(&geom, Some(&sources), &noise, snr_db).unwrap();
        for m in 0..14 {
            assert_abs_diff_eq!(rxx[(m, m)].re, 3.0 + sigma2, epsilon = 1e-12);
            assert_abs_diff_eq!(rxx[(m, m)].im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_sources_yields_noise_covariance_alone() {
        let geom = reference_geometry();
        let noise = NoiseModel::toeplitz_ramp(0.5, 14).unwrap();
        let rxx = exact_covariance(&geom, None, &noise, 10.0).unwrap();
        let row = toeplitz_ramp_first_row(14).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                assert_abs_diff_eq!(rxx[(i, j)].re, 0.5 * row[i.abs_diff(j)], epsilon = 1e-15);
                assert_eq!(rxx[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn snr_calibration_within_a_fifth_of_a_decibel() {
        let geom = reference_geometry();
        let sources = reference_sources();
        let k = 100_000;
        let snr_db = 10.0;

        let noiseless = NoiseModel::awgn(0.0).unwrap();
        let x_sig =
            synthesize_snapshots(&geom, &sources, &noiseless, k, f64::INFINITY, 11).unwrap();
        let noise = NoiseModel::awgn(1.0).unwrap();
        let sigma2 = per_element_noise_variance(&sources, &noise, snr_db);
        let zero = SourceModel::unit_power(alloc::vec![Direction::from_degrees(1.0, 0.0).unwrap()])
            .unwrap();
        // Noise-only stream: reuse the baseline-variance path.
        let noise_cal = NoiseModel::awgn(sigma2).unwrap();
        let mut rng = snapshot_rng(12, 0);
        let x_noise = synthesize_snapshots_with(
            &geom,
            &SourceModel::new(
                zero.directions().to_vec(),
                alloc::vec![0.0],
                Coherence::Independent,
            )
            .unwrap(),
            &noise_cal,
            k,
            f64::NAN,
            &mut rng,
        )
        .unwrap();

        let mean_power = |x: &SnapshotMatrix| {
            x.samples().iter().map(|v| v.norm_sqr()).sum::<f64>()
                / (x.n_elements() * x.n_snapshots()) as f64
        };
        // Per-source signal power per element is total/P for equipowered sources.
        let per_source_signal = mean_power(&x_sig) / sources.len() as f64;
        let noise_power = mean_power(&x_noise);
        let measured_db = 10.0 * (per_source_signal / noise_power).log10();
        assert!(
            (measured_db - snr_db).abs() < 0.2,
            "measured {measured_db} dB"
        );
    }

    #[test]
    fn colored_noise_shaping_matches_target_covariance() {
        let geom = reference_geometry();
        let noise = NoiseModel::toeplitz_ramp(0.7, 14).unwrap();
        let zero_power_source = SourceModel::new(
            alloc::vec![Direction::from_degrees(5.0, 0.0).unwrap()],
            alloc::vec![0.0],
            Coherence::Independent,
        )
        .unwrap();
        let k = 100_000;
        let x = synthesize_snapshots(&geom, &zero_power_source, &noise, k, f64::NAN, 5).unwrap();
        let sample = crate::covariance::sample_covariance(&x);
        let target = exact_covariance(&geom, None, &noise, f64::NAN).unwrap();
        let rel = (&sample - &target).norm() / target.norm();
        assert!(rel < 0.02, "relative Frobenius error {rel}");
    }

    #[test]
    fn large_k_sample_covariance_converges_to_exact() {
        let geom = reference_geometry();
        let sources = reference_sources();
        let noise = NoiseModel::awgn(1.0).unwrap();
        let k = 100_000;
        let x = synthesize_snapshots(&geom, &sources, &noise, k, 10.0, 21).unwrap();
        let sample = crate::covariance::sample_covariance(&x);
        let target = exact_covariance(&geom, Some(&sources), &noise, 10.0).unwrap();
        let rel = (&sample - &target).norm() / target.norm();
        assert!(rel < 0.01, "relative Frobenius error {rel}");
    }

    #[test]
    fn snapshot_matrix_validation() {
        let geom = reference_geometry();
        assert!(SnapshotMatrix::new(geom.clone(), DMatrix::zeros(13, 4)).is_err());
        assert!(SnapshotMatrix::new(geom.clone(), DMatrix::zeros(14, 0)).is_err());
        assert!(SnapshotMatrix::new(geom, DMatrix::zeros(14, 1)).is_ok());
    }
}
