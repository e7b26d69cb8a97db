//! Uniform circular array geometry and steering vectors.
//!
//! `N` identical isotropic elements sit on a circle of radius `R` in the
//! x-y plane; element `m` (1-based, `m = 1..N`) is at azimuth `2πm/N`.
//! A unit plane wave arriving from elevation `θ` (measured from the array
//! normal, so `θ = 0` is boresight) and azimuth `φ` produces the phase-only
//! element response
//!
//! ```text
//! a_m(θ, φ) = exp(j · 2π(R/λ) · sin θ · cos(2πm/N − φ))
//! ```

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // f64 math comes from the trait in no_std builds
use num_traits::Float;

use crate::error::DoaError;
use crate::Result;

/// Speed of light in vacuum, m/s (exact by definition).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TWO_PI: f64 = core::f64::consts::TAU;

/// Uniform circular array: element count, radius and operating wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct UcaGeometry {
    n_elements: usize,
    radius: f64,
    wavelength: f64,
}

impl UcaGeometry {
    /// Builds a geometry from an explicit wavelength.
    pub fn new(n_elements: usize, radius: f64, wavelength: f64) -> Result<Self> {
        if n_elements < 3 {
            return Err(DoaError::invalid("a UCA needs at least 3 elements"));
        }
        if !(radius > 0.0) {
            return Err(DoaError::invalid("radius must be positive"));
        }
        if !(wavelength > 0.0) {
            return Err(DoaError::invalid("wavelength must be positive"));
        }
        Ok(Self {
            n_elements,
            radius,
            wavelength,
        })
    }

    /// Builds a geometry from a carrier frequency in Hz (`λ = c/f`).
    pub fn from_carrier(n_elements: usize, radius: f64, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(DoaError::invalid("carrier frequency must be positive"));
        }
        Self::new(n_elements, radius, SPEED_OF_LIGHT / carrier_hz)
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Maximal array dimension `D = 2R`, used by the far-field check.
    pub fn aperture(&self) -> f64 {
        2.0 * self.radius
    }

    /// Radius in wavelengths, the only geometry quantity entering the phase.
    pub fn radius_over_wavelength(&self) -> f64 {
        self.radius / self.wavelength
    }

    /// Azimuth of element `m` (1-based): `2πm/N`, so `m = N` sits at `2π`.
    pub fn element_azimuth(&self, m: usize) -> Result<f64> {
        if m == 0 || m > self.n_elements {
            return Err(DoaError::ElementIndexOutOfRange {
                index: m,
                n_elements: self.n_elements,
            });
        }
        Ok(TWO_PI * m as f64 / self.n_elements as f64)
    }

    /// All `N` element azimuths, strictly increasing in `(0, 2π]`.
    pub fn element_azimuths(&self) -> Vec<f64> {
        (1..=self.n_elements)
            .map(|m| TWO_PI * m as f64 / self.n_elements as f64)
            .collect()
    }
}

/// An arrival direction: elevation `θ ∈ [0, π/2]`, azimuth `φ ∈ [0, 2π)`,
/// both in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    elevation: f64,
    azimuth: f64,
}

impl Direction {
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        if !(0.0..=core::f64::consts::FRAC_PI_2).contains(&elevation) {
            return Err(DoaError::invalid("elevation must lie in [0, pi/2]"));
        }
        if !(0.0..TWO_PI).contains(&azimuth) {
            return Err(DoaError::invalid("azimuth must lie in [0, 2*pi)"));
        }
        Ok(Self { elevation, azimuth })
    }

    /// Builds a direction from angles in degrees.
    pub fn from_degrees(elevation_deg: f64, azimuth_deg: f64) -> Result<Self> {
        Self::new(elevation_deg.to_radians(), azimuth_deg.to_radians())
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    /// Unit propagation vector with elevation measured from the z axis.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Great-circle angle to another direction, in radians.
    pub fn great_circle_to(&self, other: &Direction) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// A phase-only array response to one direction; every entry has modulus 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    entries: Vec<Complex64>,
}

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `N×P` matrix whose columns are the steering vectors of `P` sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponse {
    matrix: DMatrix<Complex64>,
}

impl ArrayResponse {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.matrix.ncols()
    }

    /// Splits the response into the row blocks `A1` (`P×P`), `A2` (`P×P`)
    /// and `A3` (`(N−2P)×P`) used by the modified propagator.
    pub fn partition(
        &self,
    ) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
        let n = self.n_elements();
        let p = self.n_sources();
        if n < 2 * p + 2 {
            return Err(DoaError::InsufficientElements {
                n_elements: n,
                p_sources: p,
            });
        }
        Ok((
            self.matrix.rows(0, p).into_owned(),
            self.matrix.rows(p, p).into_owned(),
            self.matrix.rows(2 * p, n - 2 * p).into_owned(),
        ))
    }
}

/// Response of element `m` (1-based) to a plane wave from `dir`:
/// `exp(j·2π(R/λ)·sinθ·cos(2πm/N − φ))`.
pub fn steering_element(geometry: &UcaGeometry, dir: &Direction, m: usize) -> Result<Complex64> {
    let element_azimuth = geometry.element_azimuth(m)?;
    let phase = TWO_PI
        * geometry.radius_over_wavelength()
        * dir.elevation().sin()
        * (element_azimuth - dir.azimuth()).cos();
    let (s, c) = phase.sin_cos();
    Ok(Complex64::new(c, s))
}

/// Expanded-product form of [`steering_element`] (the phase written as
/// `sinθcosφ·cos(2πm/N) + sinθsinφ·sin(2πm/N)`). Algebraically identical;
/// retained as an independent cross-check of the compact form.
pub fn steering_element_expanded(
    geometry: &UcaGeometry,
    dir: &Direction,
    m: usize,
) -> Result<Complex64> {
    let element_azimuth = geometry.element_azimuth(m)?;
    let (st, _) = dir.elevation().sin_cos();
    let (sp, cp) = dir.azimuth().sin_cos();
    let (se, ce) = element_azimuth.sin_cos();
    let phase = TWO_PI * geometry.radius_over_wavelength() * (st * cp * ce + st * sp * se);
    let (s, c) = phase.sin_cos();
    Ok(Complex64::new(c, s))
}

/// Full steering vector for one direction; entry `m` equals
/// [`steering_element`]`(geometry, dir, m)`.
pub fn steering_vector(geometry: &UcaGeometry, dir: &Direction) -> SteeringVector {
    let n = geometry.n_elements();
    let scale = TWO_PI * geometry.radius_over_wavelength() * dir.elevation().sin();
    let entries = (1..=n)
        .map(|m| {
            let element_azimuth = TWO_PI * m as f64 / n as f64;
            let phase = scale * (element_azimuth - dir.azimuth()).cos();
            let (s, c) = phase.sin_cos();
            Complex64::new(c, s)
        })
        .collect();
    SteeringVector { entries }
}

/// Stacks the steering vectors of pairwise-distinct directions into the
/// `N×P` array response.
pub fn array_response(geometry: &UcaGeometry, dirs: &[Direction]) -> Result<ArrayResponse> {
    if dirs.is_empty() {
        return Err(DoaError::invalid("at least one direction is required"));
    }
    for (i, a) in dirs.iter().enumerate() {
        for b in dirs.iter().skip(i + 1) {
            if a == b {
                return Err(DoaError::DegenerateDirections);
            }
        }
    }
    let n = geometry.n_elements();
    let mut data = Vec::with_capacity(n * dirs.len());
    for dir in dirs {
        data.extend_from_slice(steering_vector(geometry, dir).entries());
    }
    Ok(ArrayResponse {
        matrix: DMatrix::from_vec(n, dirs.len(), data),
    })
}

/// Result of the identifiability checks; informational only.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `N >= 2P + 2`.
    pub element_count_ok: bool,
    /// Smallest element count satisfying the condition for this `P`.
    pub required_elements: usize,
    /// Far-field (Fraunhofer) distance `2D²/λ` with `D = 2R`, in meters.
    pub far_field_threshold_m: f64,
    /// Per-source far-field flags when distances were supplied.
    pub far_field_ok: Option<Vec<bool>>,
}

impl AssumptionReport {
    /// True when every evaluated condition holds.
    pub fn all_ok(&self) -> bool {
        self.element_count_ok
            && self
                .far_field_ok
                .as_ref()
                .is_none_or(|v| v.iter().all(|&ok| ok))
    }
}

/// Checks the element-count condition `N >= 2P + 2` and, when source
/// distances are given, the far-field condition `d >= 2D²/λ`. Violations
/// are reported, never thrown; the caller decides what to do.
pub fn validate_assumptions(
    geometry: &UcaGeometry,
    p_sources: usize,
    source_distances: Option<&[f64]>,
) -> AssumptionReport {
    let required = 2 * p_sources + 2;
    let d = geometry.aperture();
    let threshold = 2.0 * d * d / geometry.wavelength();
    AssumptionReport {
        element_count_ok: geometry.n_elements() >= required,
        required_elements: required,
        far_field_threshold_m: threshold,
        far_field_ok: source_distances.map(|ds| ds.iter().map(|&dist| dist >= threshold).collect()),
    }
}
