//! TOML scenario files.
//!
//! Human-facing units throughout: angles in degrees, lengths in meters,
//! frequency in Hz. Unknown keys are rejected. Missing optional keys take
//! the documented defaults (1° grid, `["mpm"]` estimators, linear-ramp
//! Toeplitz row).
//!
//! ```toml
//! [geometry]
//! elements = 14
//! radius_m = 0.38
//! carrier_hz = 900e6
//!
//! [sources]
//! directions_deg = [[15.0, 20.0], [30.0, 44.0], [66.0, 69.0]]
//!
//! [noise]
//! kind = "awgn"          # or "toeplitz"
//! snr_db = 10.0          # `inf` runs noiseless
//!
//! [experiment]
//! snapshots = 100
//! trials = 50
//! seed = 1
//! estimators = ["mpm"]
//! ```

use serde::Deserialize;

use doa_core::array::{Direction, UcaGeometry};
use doa_core::estimators::EstimatorKind;
use doa_core::experiments::Scenario;
use doa_core::signal::{
    toeplitz_ramp_first_row, toeplitz_step_first_row, Coherence, NoiseModel, SourceModel,
};
use doa_core::spectrum::ScanGrid;

/// Parsed scenario file, before conversion into a [`Scenario`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub geometry: GeometrySection,
    pub sources: SourcesSection,
    pub noise: NoiseSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub elements: usize,
    pub radius_m: f64,
    pub carrier_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesSection {
    /// `[elevation_deg, azimuth_deg]` per source.
    pub directions_deg: Vec<[f64; 2]>,
    /// Per-source powers; defaults to all ones.
    pub powers: Option<Vec<f64>>,
    /// Source index pairs sharing one waveform; defaults to none.
    pub coherent_pairs: Option<Vec<[usize; 2]>>,
    /// Relative power perturbation in [0, 1); defaults to 0.
    pub power_jitter: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `awgn` or `toeplitz`.
    pub kind: String,
    /// Per-source SNR in dB; `inf` for noiseless.
    pub snr_db: f64,
    /// Baseline noise variance when no SNR constraint applies; default 1.
    pub variance: Option<f64>,
    /// Explicit Toeplitz first row (toeplitz only).
    pub first_row: Option<Vec<f64>>,
    /// Fixed-decrement alternative to the default ramp (toeplitz only).
    pub first_row_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub snapshots: usize,
    pub trials: usize,
    pub seed: u64,
    /// Grid spacing in degrees for both axes; default 1.
    pub grid_deg: Option<f64>,
    /// Subset of `mpm`, `pm`, `music`; default `["mpm"]`.
    pub estimators: Option<Vec<String>>,
}

impl ScenarioFile {
    /// Parses a TOML document; diagnostics carry line/column positions.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("scenario parse error: {e}"))
    }

    /// Converts to a runnable [`Scenario`], applying defaults and optional
    /// command-line overrides.
    pub fn to_scenario(
        &self,
        seed_override: Option<u64>,
        grid_deg_override: Option<f64>,
        estimator_override: &[EstimatorKind],
    ) -> Result<Scenario, String> {
        let geometry = UcaGeometry::from_carrier(
            self.geometry.elements,
            self.geometry.radius_m,
            self.geometry.carrier_hz,
        )
        .map_err(|e| format!("geometry: {e}"))?;

        let directions = self
            .sources
            .directions_deg
            .iter()
            .map(|&[t, p]| Direction::from_degrees(t, p).map_err(|e| format!("sources: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let powers = self
            .sources
            .powers
            .clone()
            .unwrap_or_else(|| vec![1.0; directions.len()]);
        let coherence = match &self.sources.coherent_pairs {
            None => Coherence::Independent,
            Some(pairs) if pairs.is_empty() => Coherence::Independent,
            Some(pairs) => Coherence::CoherentPairs(pairs.iter().map(|&[a, b]| (a, b)).collect()),
        };
        let mut sources =
            SourceModel::new(directions, powers, coherence).map_err(|e| format!("sources: {e}"))?;
        if let Some(jitter) = self.sources.power_jitter {
            sources = sources
                .with_power_jitter(jitter)
                .map_err(|e| format!("sources: {e}"))?;
        }

        let variance = self.noise.variance.unwrap_or(1.0);
        let noise = match self.noise.kind.as_str() {
            "awgn" => {
                if self.noise.first_row.is_some() || self.noise.first_row_step.is_some() {
                    return Err(
                        "noise: first_row/first_row_step only apply to kind = \"toeplitz\""
                            .to_string(),
                    );
                }
                NoiseModel::awgn(variance).map_err(|e| format!("noise: {e}"))?
            }
            "toeplitz" => {
                let first_row = match (&self.noise.first_row, self.noise.first_row_step) {
                    (Some(_), Some(_)) => {
                        return Err("noise: first_row and first_row_step are mutually exclusive"
                            .to_string())
                    }
                    (Some(row), None) => row.clone(),
                    (None, Some(step)) => toeplitz_step_first_row(self.geometry.elements, step)
                        .map_err(|e| format!("noise: {e}"))?,
                    (None, None) => toeplitz_ramp_first_row(self.geometry.elements)
                        .map_err(|e| format!("noise: {e}"))?,
                };
                NoiseModel::toeplitz(variance, first_row).map_err(|e| format!("noise: {e}"))?
            }
            other => {
                return Err(format!(
                    "noise: unknown kind {other:?} (expected awgn|toeplitz)"
                ))
            }
        };

        let grid_deg = grid_deg_override
            .or(self.experiment.grid_deg)
            .unwrap_or(1.0);
        let grid =
            ScanGrid::from_degrees(grid_deg, grid_deg).map_err(|e| format!("experiment: {e}"))?;

        let estimators = if !estimator_override.is_empty() {
            estimator_override.to_vec()
        } else {
            match &self.experiment.estimators {
                None => vec![EstimatorKind::Mpm],
                Some(names) => names
                    .iter()
                    .map(|name| {
                        EstimatorKind::parse(name).ok_or_else(|| {
                            format!(
                                "experiment: unknown estimator {name:?} (expected mpm|pm|music)"
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            }
        };

        let scenario = Scenario {
            geometry,
            sources,
            noise,
            snr_db: self.noise.snr_db,
            snapshots: self.experiment.snapshots,
            trials: self.experiment.trials,
            grid,
            estimators,
            seed: seed_override.unwrap_or(self.experiment.seed),
        };
        scenario.validate().map_err(|e| format!("scenario: {e}"))?;
        Ok(scenario)
    }
}
