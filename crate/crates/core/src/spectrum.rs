//! Two-dimensional grid scan over (elevation, azimuth), peak extraction,
//! and optional sub-grid refinement.
//!
//! Elevation spans `[0, π/2]` inclusive and azimuth `[0, 2π)` with the
//! azimuth axis treated as periodic. The default spacing is 1° on both
//! axes, which puts integer-degree scenarios exactly on grid nodes.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // f64 math comes from the trait in no_std builds
use num_traits::Float;

use crate::array::{steering_vector, Direction, UcaGeometry};
use crate::error::DoaError;
use crate::estimators::SpectrumFn;
use crate::Result;

const FRAC_PI_2: f64 = core::f64::consts::FRAC_PI_2;
const TWO_PI: f64 = core::f64::consts::TAU;
// Relative slack when counting grid nodes, so exact divisions stay exact.
const NODE_SNAP: f64 = 1e-9;

/// Anything that maps (elevation, azimuth) to a nonnegative power.
///
/// Implemented by [`SpectrumFn`] and by plain closures (handy for synthetic
/// test surfaces).
pub trait SpatialSpectrum: Sync {
    fn power_at(&self, elevation: f64, azimuth: f64) -> f64;
}

impl SpatialSpectrum for SpectrumFn {
    fn power_at(&self, elevation: f64, azimuth: f64) -> f64 {
        self.eval(&Direction::new_clamped(elevation, azimuth))
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> SpatialSpectrum for F {
    fn power_at(&self, elevation: f64, azimuth: f64) -> f64 {
        self(elevation, azimuth)
    }
}

impl Direction {
    /// Grid-internal constructor: clamps elevation into `[0, π/2]` and
    /// wraps azimuth into `[0, 2π)` instead of erroring on boundary
    /// rounding.
    pub(crate) fn new_clamped(elevation: f64, azimuth: f64) -> Direction {
        let el = elevation.clamp(0.0, FRAC_PI_2);
        let mut az = azimuth % TWO_PI;
        if az < 0.0 {
            az += TWO_PI;
        }
        if az >= TWO_PI {
            az = 0.0;
        }
        Direction::new(el, az).expect("clamped angles are in range")
    }
}

/// Scan-grid spacing over the fixed ranges `θ ∈ [0, π/2]`, `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    theta_step: f64,
    phi_step: f64,
}

impl Default for ScanGrid {
    /// 1° spacing on both axes.
    fn default() -> Self {
        Self::from_degrees(1.0, 1.0).expect("1 degree grid is valid")
    }
}

impl ScanGrid {
    pub fn new(theta_step: f64, phi_step: f64) -> Result<Self> {
        if !(theta_step > 0.0) || !(phi_step > 0.0) {
            return Err(DoaError::invalid("grid steps must be positive"));
        }
        let grid = Self {
            theta_step,
            phi_step,
        };
        if grid.n_theta() < 3 || grid.n_phi() < 3 {
            return Err(DoaError::invalid("grid needs at least 3 nodes per axis"));
        }
        Ok(grid)
    }

    pub fn from_degrees(theta_step_deg: f64, phi_step_deg: f64) -> Result<Self> {
        Self::new(theta_step_deg.to_radians(), phi_step_deg.to_radians())
    }

    pub fn theta_step(&self) -> f64 {
        self.theta_step
    }

    pub fn phi_step(&self) -> f64 {
        self.phi_step
    }

    /// Node count along elevation (nodes at `i·step ≤ π/2`).
    pub fn n_theta(&self) -> usize {
        (FRAC_PI_2 / self.theta_step * (1.0 + NODE_SNAP)).floor() as usize + 1
    }

    /// Node count along azimuth (nodes at `j·step < 2π`).
    pub fn n_phi(&self) -> usize {
        (TWO_PI / self.phi_step * (1.0 - NODE_SNAP)).ceil() as usize
    }

    pub fn theta_at(&self, i: usize) -> f64 {
        (i as f64 * self.theta_step).min(FRAC_PI_2)
    }

    pub fn phi_at(&self, j: usize) -> f64 {
        j as f64 * self.phi_step
    }

    pub fn direction_at(&self, i: usize, j: usize) -> Direction {
        Direction::new_clamped(self.theta_at(i), self.phi_at(j))
    }
}

/// Spectrum values sampled on a [`ScanGrid`], row-major in θ then φ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    values: Vec<f64>,
    n_theta: usize,
    n_phi: usize,
    grid: ScanGrid,
}

impl SpectrumGrid {
    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid node of the global maximum (ties resolved to the first in
    /// row-major order).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let v = self.value(i, j);
                if v > best_v {
                    best_v = v;
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Applies a value transform in place (used by relabeling tests).
    pub fn map_values(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }

    /// CSV export: header `theta_deg,phi_deg,power`, θ-major rows, degrees
    /// with 6 fractional digits, power in scientific notation with 9
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 32 + 24);
        out.push_str("theta_deg,phi_deg,power\n");
        for i in 0..self.n_theta {
            let theta_deg = self.grid.theta_at(i).to_degrees();
            for j in 0..self.n_phi {
                let phi_deg = self.grid.phi_at(j).to_degrees();
                out.push_str(&alloc::format!(
                    "{theta_deg:.6},{phi_deg:.6},{:.8e}\n",
                    self.value(i, j)
                ));
            }
        }
        out
    }
}

/// Precomputed steering vectors for every grid node of one geometry, shared
/// across estimators and Monte Carlo trials.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    entries: Vec<Complex64>,
    n_elements: usize,
    n_theta: usize,
    n_phi: usize,
}

impl SteeringTable {
    pub fn new(geometry: &UcaGeometry, grid: &ScanGrid) -> Self {
        let (n_theta, n_phi) = (grid.n_theta(), grid.n_phi());
        let n = geometry.n_elements();
        let mut entries = Vec::with_capacity(n_theta * n_phi * n);
        for i in 0..n_theta {
            for j in 0..n_phi {
                let sv = steering_vector(geometry, &grid.direction_at(i, j));
                entries.extend_from_slice(sv.entries());
            }
        }
        Self {
            entries,
            n_elements: n,
            n_theta,
            n_phi,
        }
    }

    fn steering(&self, i: usize, j: usize) -> &[Complex64] {
        let start = (i * self.n_phi + j) * self.n_elements;
        &self.entries[start..start + self.n_elements]
    }
}

fn scan_row<S: SpatialSpectrum + ?Sized>(
    spec: &S,
    grid: &ScanGrid,
    i: usize,
    n_phi: usize,
) -> Vec<f64> {
    let theta = grid.theta_at(i);
    (0..n_phi)
        .map(|j| spec.power_at(theta, grid.phi_at(j)))
        .collect()
}

fn scan_row_table(spec: &SpectrumFn, table: &SteeringTable, i: usize) -> Vec<f64> {
    (0..table.n_phi)
        .map(|j| spec.eval_steering(table.steering(i, j)))
        .collect()
}

fn assemble(rows: Vec<Vec<f64>>, n_theta: usize, n_phi: usize, grid: ScanGrid) -> SpectrumGrid {
    let mut values = Vec::with_capacity(n_theta * n_phi);
    for row in rows {
        debug_assert_eq!(row.len(), n_phi);
        values.extend_from_slice(&row);
    }
    SpectrumGrid {
        values,
        n_theta,
        n_phi,
        grid,
    }
}

/// Evaluates a spectrum on every grid node. With the `rayon` feature the
/// rows are scanned in parallel; the assembled grid is bit-identical to a
/// sequential scan.
pub fn scan<S: SpatialSpectrum>(spec: &S, grid: &ScanGrid) -> SpectrumGrid {
    let (n_theta, n_phi) = (grid.n_theta(), grid.n_phi());
    #[cfg(feature = "rayon")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n_theta)
            .into_par_iter()
            .map(|i| scan_row(spec, grid, i, n_phi))
            .collect()
    };
    #[cfg(not(feature = "rayon"))]
    let rows: Vec<Vec<f64>> = (0..n_theta)
        .map(|i| scan_row(spec, grid, i, n_phi))
        .collect();
    assemble(rows, n_theta, n_phi, *grid)
}

/// [`scan`] against a precomputed [`SteeringTable`]; node-for-node
/// bit-identical to the direct scan of the same evaluator.
pub fn scan_with_table(spec: &SpectrumFn, grid: &ScanGrid, table: &SteeringTable) -> SpectrumGrid {
    assert_eq!(
        table.n_elements,
        spec.geometry().n_elements(),
        "table geometry mismatch"
    );
    let (n_theta, n_phi) = (table.n_theta, table.n_phi);
    #[cfg(feature = "rayon")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n_theta)
            .into_par_iter()
            .map(|i| scan_row_table(spec, table, i))
            .collect()
    };
    #[cfg(not(feature = "rayon"))]
    let rows: Vec<Vec<f64>> = (0..n_theta)
        .map(|i| scan_row_table(spec, table, i))
        .collect();
    assemble(rows, n_theta, n_phi, *grid)
}

/// Always-sequential scan, kept for determinism checks against the
/// (possibly parallel) [`scan`].
pub fn scan_sequential<S: SpatialSpectrum>(spec: &S, grid: &ScanGrid) -> SpectrumGrid {
    let (n_theta, n_phi) = (grid.n_theta(), grid.n_phi());
    let rows: Vec<Vec<f64>> = (0..n_theta)
        .map(|i| scan_row(spec, grid, i, n_phi))
        .collect();
    assemble(rows, n_theta, n_phi, *grid)
}

/// One extracted spectrum peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub direction: Direction,
    pub power: f64,
    /// Set for peaks on the θ = 0 row, where every azimuth aliases to the
    /// same steering vector and the reported azimuth is meaningless.
    pub azimuth_indeterminate: bool,
}

/// Peaks sorted by descending power.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Peak> {
        self.peaks.iter()
    }
}

/// Extracts up to `max_peaks` strict 8-neighborhood local maxima, azimuth
/// wrapping modulo 2π and elevation edges compared against existing
/// neighbors only. Fewer maxima than requested yields a shorter list.
pub fn find_peaks(sg: &SpectrumGrid, max_peaks: usize) -> Result<PeakSet> {
    if max_peaks == 0 {
        return Err(DoaError::invalid("max_peaks must be at least 1"));
    }
    let (nt, np) = (sg.n_theta(), sg.n_phi());
    let mut found: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..nt {
        for j in 0..np {
            let v = sg.value(i, j);
            let mut is_peak = true;
            'neigh: for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= nt as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(np as i64) as usize;
                    if sg.value(ii as usize, jj) >= v {
                        is_peak = false;
                        break 'neigh;
                    }
                }
            }
            if is_peak {
                found.push((v, i, j));
            }
        }
    }
    found.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    found.truncate(max_peaks);
    Ok(PeakSet {
        peaks: found
            .into_iter()
            .map(|(v, i, j)| Peak {
                direction: sg.grid().direction_at(i, j),
                power: v,
                azimuth_indeterminate: i == 0,
            })
            .collect(),
    })
}

/// Refines a grid-node peak by independent per-axis parabolic interpolation
/// through three log-power samples. Offsets are clamped to half a step;
/// degenerate curvature returns the input unchanged. Off by default in the
/// experiment harness.
pub fn refine_peak<S: SpatialSpectrum>(spec: &S, peak: &Direction, grid: &ScanGrid) -> Direction {
    let sample = |theta: f64, phi: f64| {
        let d = Direction::new_clamped(theta, phi);
        spec.power_at(d.elevation(), d.azimuth())
            .max(f64::MIN_POSITIVE)
            .ln()
    };
    let center_t = sample(peak.elevation(), peak.azimuth());

    // Elevation axis: skip when a neighbor would clamp onto the center.
    let mut theta = peak.elevation();
    let (tl, tr) = (theta - grid.theta_step(), theta + grid.theta_step());
    if tl >= 0.0 && tr <= FRAC_PI_2 {
        let (l, r) = (sample(tl, peak.azimuth()), sample(tr, peak.azimuth()));
        theta += parabolic_offset(l, center_t, r) * grid.theta_step();
        theta = theta.clamp(0.0, FRAC_PI_2);
    }

    let mut phi = peak.azimuth();
    let (l, r) = (
        sample(peak.elevation(), phi - grid.phi_step()),
        sample(peak.elevation(), phi + grid.phi_step()),
    );
    phi += parabolic_offset(l, center_t, r) * grid.phi_step();

    Direction::new_clamped(theta, phi)
}

/// Vertex abscissa (in step units, clamped to ±1/2) of the parabola through
/// (−1, l), (0, c), (1, r); 0 when the curvature is not strictly negative.
fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let curvature = l + r - 2.0 * c;
    if !(curvature < -1e-300) {
        return 0.0;
    }
    ((l - r) / (2.0 * curvature)).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_grid_node_counts() {
        let grid = ScanGrid::default();
        assert_eq!(grid.n_theta(), 91);
        assert_eq!(grid.n_phi(), 360);
        let half = ScanGrid::from_degrees(0.5, 0.5).unwrap();
        assert_eq!(half.n_theta(), 181);
        assert_eq!(half.n_phi(), 720);
    }

    #[test]
    fn grid_validation() {
        assert!(ScanGrid::from_degrees(0.0, 1.0).is_err());
        assert!(ScanGrid::from_degrees(1.0, -2.0).is_err());
        // 50 degree steps leave fewer than 3 theta nodes.
        assert!(ScanGrid::from_degrees(50.0, 1.0).is_err());
    }

    #[test]
    fn integer_degree_nodes_match_from_degrees_directions() {
        let grid = ScanGrid::default();
        let dir = Direction::from_degrees(15.0, 20.0).unwrap();
        assert_eq!(grid.theta_at(15), dir.elevation());
        assert_eq!(grid.phi_at(20), dir.azimuth());
        // Same node on the half-degree grid.
        let half = ScanGrid::from_degrees(0.5, 0.5).unwrap();
        assert_eq!(half.theta_at(30), dir.elevation());
        assert_eq!(half.phi_at(40), dir.azimuth());
    }

    #[test]
    fn constant_spectrum_scans_flat_and_has_no_peaks() {
        let grid = ScanGrid::from_degrees(5.0, 5.0).unwrap();
        let sg = scan(&|_t: f64, _p: f64| 2.5, &grid);
        assert!(sg.values().iter().all(|&v| v == 2.5));
        assert!(find_peaks(&sg, 3).unwrap().is_empty());
        assert!(find_peaks(&sg, 0).is_err());
    }

    #[test]
    fn scan_matches_sequential_scan_exactly() {
        let grid = ScanGrid::from_degrees(3.0, 3.0).unwrap();
        let f = |t: f64, p: f64| (t * 3.1).sin().abs() + (p * 0.7).cos().abs() + 1.0;
        let a = scan(&f, &grid);
        let b = scan_sequential(&f, &grid);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn single_bump_is_found_once_despite_azimuth_wrap() {
        let grid = ScanGrid::from_degrees(1.0, 1.0).unwrap();
        // Bump centered at phi = 0 so the wraparound neighborhood matters.
        let f = |t: f64, p: f64| {
            let dp = if p > core::f64::consts::PI {
                p - TWO_PI
            } else {
                p
            };
            (-((t - 0.5).powi(2) + dp.powi(2)) * 40.0).exp()
        };
        let sg = scan(&f, &grid);
        let peaks = find_peaks(&sg, 4).unwrap();
        assert_eq!(peaks.len(), 1, "{peaks:?}");
        let top = &peaks.peaks()[0];
        assert_abs_diff_eq!(top.direction.azimuth(), 0.0);
        assert!(!top.azimuth_indeterminate);
    }

    #[test]
    fn monotone_relabeling_keeps_peak_locations_and_order() {
        let grid = ScanGrid::from_degrees(2.0, 2.0).unwrap();
        let f = |t: f64, p: f64| {
            ((-((t - 0.4).powi(2) + (p - 1.0).powi(2)) * 30.0).exp()
                + 0.6 * (-((t - 1.0).powi(2) + (p - 4.0).powi(2)) * 30.0).exp())
                + 0.01
        };
        let mut sg = scan(&f, &grid);
        let before = find_peaks(&sg, 5).unwrap();
        sg.map_values(|v| 3.0 * v.ln() + 7.0);
        let after = find_peaks(&sg, 5).unwrap();
        assert_eq!(before.len(), after.len());
        for (a, b) in before.iter().zip(after.iter()) {
            assert_eq!(a.direction, b.direction);
        }
    }

    #[test]
    fn boresight_row_never_hosts_a_strict_peak() {
        let grid = ScanGrid::from_degrees(5.0, 5.0).unwrap();
        // Azimuth-independent at theta=0, maximal there: the whole row ties,
        // so no strict local maximum exists on it.
        let f = |t: f64, _p: f64| 1.0 / (1.0 + t);
        let sg = scan(&f, &grid);
        let peaks = find_peaks(&sg, 3).unwrap();
        assert!(peaks.is_empty());
    }

    #[test]
    fn refine_centered_bump_returns_node() {
        let grid = ScanGrid::from_degrees(1.0, 1.0).unwrap();
        let center = grid.direction_at(30, 40);
        let (t0, p0) = (center.elevation(), center.azimuth());
        let f = move |t: f64, p: f64| (-((t - t0).powi(2) + (p - p0).powi(2)) * 10.0).exp();
        let refined = refine_peak(&f, &center, &grid);
        assert_abs_diff_eq!(refined.elevation(), t0, epsilon = 1e-12);
        assert_abs_diff_eq!(refined.azimuth(), p0, epsilon = 1e-12);
    }

    #[test]
    fn refine_half_step_bump_moves_half_step() {
        let grid = ScanGrid::from_degrees(1.0, 1.0).unwrap();
        let node = grid.direction_at(30, 40);
        let (t0, p0) = (
            node.elevation() + grid.theta_step() / 2.0,
            node.azimuth() + grid.phi_step() / 2.0,
        );
        let f = move |t: f64, p: f64| (-((t - t0).powi(2) + (p - p0).powi(2)) * 10.0).exp();
        let refined = refine_peak(&f, &node, &grid);
        let dt = (refined.elevation() - node.elevation()) / grid.theta_step();
        let dp = (refined.azimuth() - node.azimuth()) / grid.phi_step();
        assert!((dt - 0.5).abs() <= 0.05, "theta offset {dt}");
        assert!((dp - 0.5).abs() <= 0.05, "phi offset {dp}");
    }

    #[test]
    fn refine_clamps_at_the_elevation_boundary() {
        let grid = ScanGrid::from_degrees(1.0, 1.0).unwrap();
        let node = grid.direction_at(90, 10);
        let f = |t: f64, _p: f64| t + 1.0;
        let refined = refine_peak(&f, &node, &grid);
        assert!(refined.elevation() <= FRAC_PI_2);
        // Degenerate (linear) phi profile: azimuth unchanged.
        assert_eq!(refined.azimuth(), node.azimuth());
    }

    #[test]
    fn csv_export_format() {
        let grid = ScanGrid::from_degrees(45.0, 120.0).unwrap();
        let sg = scan(&|t: f64, p: f64| 1.0e9 * (1.0 + t + p), &grid);
        let csv = sg.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("theta_deg,phi_deg,power"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.000000,0.000000,"), "{first}");
        let power_field = first.rsplit(',').next().unwrap();
        assert!(
            power_field.contains('e'),
            "scientific notation expected: {power_field}"
        );
        // 9 significant digits: 1 integer + 8 fractional mantissa digits.
        let mantissa = power_field.split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 8);
        assert_eq!(csv.lines().count(), 1 + sg.n_theta() * sg.n_phi());
    }
}
