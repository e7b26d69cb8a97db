//! Seeded Monte Carlo harness: scenario definition, trial execution,
//! peak-to-truth matching, error metrics, and summary aggregation.
//!
//! Trial `t` of a scenario draws from ChaCha stream `(seed, t)`, so runs
//! are reproducible and trials are order-independent; with the `rayon`
//! feature the trials execute in parallel and aggregate to bit-identical
//! summaries.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math comes from the trait in no_std builds
use num_traits::Float;

use crate::array::{Direction, UcaGeometry};
use crate::covariance::{partial_covariances, sample_covariance_counted, OpCount};
use crate::error::DoaError;
use crate::estimators::{fit_mpm, fit_music, fit_pm, mpm_spectrum, EstimatorKind};
use crate::signal::{
    snapshot_rng, synthesize_snapshots_with, toeplitz_ramp_first_row, NoiseKind, NoiseModel,
    SnapshotMatrix, SourceModel,
};
use crate::spectrum::{
    find_peaks, scan_with_table, PeakSet, ScanGrid, SpectrumGrid, SteeringTable,
};
use crate::Result;

/// Great-circle detection threshold in degrees (two cells of the default
/// grid), frozen after the pilot calibration run shipped with the repo.
pub const DETECTION_THRESHOLD_DEG: f64 = 2.0;

/// Largest source count the exhaustive permutation matcher accepts.
pub const MAX_MATCHED_SOURCES: usize = 6;

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: UcaGeometry,
    pub sources: SourceModel,
    pub noise: NoiseModel,
    /// Per-source SNR in dB; `f64::INFINITY` runs noiseless.
    pub snr_db: f64,
    /// Snapshots per trial (K).
    pub snapshots: usize,
    /// Monte Carlo trials (L).
    pub trials: usize,
    pub grid: ScanGrid,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
}

impl Scenario {
    /// Validates every cross-field constraint needed for trials to run.
    pub fn validate(&self) -> Result<()> {
        let n = self.geometry.n_elements();
        let p = self.sources.len();
        if self.snapshots == 0 {
            return Err(DoaError::invalid("snapshots must be at least 1"));
        }
        if self.trials == 0 {
            return Err(DoaError::invalid("trials must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(DoaError::invalid("at least one estimator must be selected"));
        }
        if p > MAX_MATCHED_SOURCES {
            return Err(DoaError::invalid(
                "the permutation matcher supports at most 6 sources",
            ));
        }
        if p >= n {
            return Err(DoaError::invalid(
                "source count must be below the element count",
            ));
        }
        if self.estimators.contains(&EstimatorKind::Mpm) && n < 2 * p + 2 {
            return Err(DoaError::InsufficientElements {
                n_elements: n,
                p_sources: p,
            });
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(DoaError::invalid("snr_db must be finite or +inf (noiseless)"));
        }
        // Surface unusable noise shapes before any trial runs.
        self.noise.spatial_covariance(n, 0.0)?;
        Ok(())
    }
}

/// Why an estimator produced no usable spectrum in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FailureKind {
    SingularBlock,
    NumericalFailure,
}

/// Failure record attached to a trial result.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub kind: FailureKind,
    pub message: String,
}

/// Per-source angular errors of one matched peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularError {
    pub theta_deg: f64,
    /// Azimuth error wrapped into (−180°, 180°], reported as a magnitude.
    pub phi_deg: f64,
    pub great_circle_deg: f64,
}

/// Outcome of one estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub estimator: EstimatorKind,
    pub trial_index: usize,
    pub peaks: PeakSet,
    /// Entry per true source; `None` when no peak was assigned to it.
    pub source_errors: Vec<Option<AngularError>>,
    /// Per-source flags: matched and within [`DETECTION_THRESHOLD_DEG`].
    pub detected: Vec<bool>,
    pub ops: OpCount,
    pub failure: Option<TrialFailure>,
}

impl TrialResult {
    pub fn all_detected(&self) -> bool {
        !self.detected.is_empty() && self.detected.iter().all(|&d| d)
    }

    fn failed(
        estimator: EstimatorKind,
        trial_index: usize,
        p: usize,
        ops: OpCount,
        err: &DoaError,
    ) -> Self {
        let kind = match err {
            DoaError::SingularBlock { .. } => FailureKind::SingularBlock,
            _ => FailureKind::NumericalFailure,
        };
        TrialResult {
            estimator,
            trial_index,
            peaks: PeakSet::default(),
            source_errors: alloc::vec![None; p],
            detected: alloc::vec![false; p],
            ops,
            failure: Some(TrialFailure {
                kind,
                message: err.to_string(),
            }),
        }
    }
}

/// Spectrum, peaks, and counters of one estimator on one snapshot matrix.
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub spectrum: SpectrumGrid,
    pub peaks: PeakSet,
    pub ops: OpCount,
}

/// Runs one estimator end to end on a snapshot matrix: covariance stage,
/// fit, full grid scan, top-P peak extraction.
pub fn estimate_on_snapshots(
    x: &SnapshotMatrix,
    p_sources: usize,
    grid: &ScanGrid,
    estimator: EstimatorKind,
) -> Result<EstimateOutcome> {
    let table = SteeringTable::new(x.geometry(), grid);
    let mut ops = OpCount::new();
    estimate_with_table(x, p_sources, grid, estimator, &table, &mut ops)
}

// `ops` accumulates even when the fit fails, so failure records still
// disclose the covariance-stage work that was done.
fn estimate_with_table(
    x: &SnapshotMatrix,
    p_sources: usize,
    grid: &ScanGrid,
    estimator: EstimatorKind,
    table: &SteeringTable,
    ops: &mut OpCount,
) -> Result<EstimateOutcome> {
    let spectrum_fn = match estimator {
        EstimatorKind::Mpm => {
            let pc = partial_covariances(x, p_sources, ops)?;
            let prop = fit_mpm(&pc, ops)?;
            mpm_spectrum(&prop, x.geometry())?
        }
        EstimatorKind::Pm => {
            let rxx = sample_covariance_counted(x, ops);
            fit_pm(&rxx, p_sources, x.geometry(), ops)?
        }
        EstimatorKind::Music => {
            let rxx = sample_covariance_counted(x, ops);
            fit_music(&rxx, p_sources, x.geometry(), ops)?
        }
    };
    let spectrum = scan_with_table(&spectrum_fn, grid, table);
    let peaks = find_peaks(&spectrum, p_sources)?;
    Ok(EstimateOutcome {
        spectrum,
        peaks,
        ops: ops.clone(),
    })
}

/// Wraps an angle difference into (−π, π].
fn wrap_angle(mut d: f64) -> f64 {
    const TWO_PI: f64 = core::f64::consts::TAU;
    d %= TWO_PI;
    if d > core::f64::consts::PI {
        d -= TWO_PI;
    } else if d <= -core::f64::consts::PI {
        d += TWO_PI;
    }
    d
}

fn angular_error(peak: &Direction, truth: &Direction) -> AngularError {
    AngularError {
        theta_deg: (peak.elevation() - truth.elevation()).abs().to_degrees(),
        phi_deg: wrap_angle(peak.azimuth() - truth.azimuth())
            .abs()
            .to_degrees(),
        great_circle_deg: peak.great_circle_to(truth).to_degrees(),
    }
}

fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    // Heap's algorithm; k <= MAX_MATCHED_SOURCES keeps this tiny.
    let mut idx: Vec<usize> = (0..k).collect();
    let mut c = alloc::vec![0usize; k];
    visit(&idx);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            visit(&idx);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Assigns peaks to true directions by minimizing the total great-circle
/// distance over all truth permutations (exhaustive; optimal for P ≤ 6).
/// Unassigned sources (fewer peaks than sources) get `None`.
pub fn match_peaks_to_truths(peaks: &PeakSet, truths: &[Direction]) -> Vec<Option<AngularError>> {
    let p = truths.len();
    let m = peaks.len().min(p);
    if m == 0 {
        return alloc::vec![None; p];
    }
    let mut best_cost = f64::INFINITY;
    let mut best_perm: Vec<usize> = (0..p).collect();
    for_each_permutation(p, |perm| {
        let mut cost = 0.0;
        for (peak, &t) in peaks.iter().take(m).zip(perm.iter()) {
            cost += peak.direction.great_circle_to(&truths[t]);
        }
        if cost < best_cost {
            best_cost = cost;
            best_perm = perm.to_vec();
        }
    });
    let mut errors = alloc::vec![None; p];
    for (peak, &t) in peaks.iter().take(m).zip(best_perm.iter()) {
        errors[t] = Some(angular_error(&peak.direction, &truths[t]));
    }
    errors
}

/// Runs every requested estimator on trial `trial_index` of the scenario.
/// Estimator failures are captured in the results, never propagated.
pub fn run_trial(scn: &Scenario, trial_index: usize) -> Result<Vec<TrialResult>> {
    scn.validate()?;
    let table = SteeringTable::new(&scn.geometry, &scn.grid);
    Ok(run_trial_with_table(scn, trial_index, &table))
}

fn run_trial_with_table(
    scn: &Scenario,
    trial_index: usize,
    table: &SteeringTable,
) -> Vec<TrialResult> {
    let p = scn.sources.len();
    let mut rng = snapshot_rng(scn.seed, trial_index as u64);
    let x = synthesize_snapshots_with(
        &scn.geometry,
        &scn.sources,
        &scn.noise,
        scn.snapshots,
        scn.snr_db,
        &mut rng,
    )
    .expect("scenario was validated");

    scn.estimators
        .iter()
        .map(|&estimator| {
            let mut ops = OpCount::new();
            match estimate_with_table(&x, p, &scn.grid, estimator, table, &mut ops) {
                Ok(outcome) => {
                    let source_errors =
                        match_peaks_to_truths(&outcome.peaks, scn.sources.directions());
                    let detected = source_errors
                        .iter()
                        .map(|e| {
                            e.as_ref()
                                .is_some_and(|e| e.great_circle_deg <= DETECTION_THRESHOLD_DEG)
                        })
                        .collect();
                    TrialResult {
                        estimator,
                        trial_index,
                        peaks: outcome.peaks,
                        source_errors,
                        detected,
                        ops: outcome.ops,
                        failure: None,
                    }
                }
                Err(err) => TrialResult::failed(estimator, trial_index, p, ops, &err),
            }
        })
        .collect()
}

/// Failure tallies for one estimator across an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FailureCounts {
    pub total: usize,
    pub singular_block: usize,
    pub numerical_failure: usize,
}

/// Mean per-trial operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeanOps {
    pub complex_multiplies: f64,
    pub complex_adds: f64,
}

/// Aggregated metrics for one estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub trials: usize,
    pub failures: FailureCounts,
    /// Fraction of trials in which each source was matched within the
    /// detection threshold.
    pub detection_rate_per_source: Vec<f64>,
    /// Fraction of trials in which every source was detected.
    pub all_sources_detection_rate: f64,
    /// RMS errors over detected sources only (`null` when none).
    pub rmse_theta_deg: Option<f64>,
    pub rmse_phi_deg: Option<f64>,
    pub rmse_gc_deg: Option<f64>,
    /// Number of (trial, source) detections behind the RMSE figures.
    pub rmse_sample_count: usize,
    pub mean_ops: MeanOps,
}

/// Scenario echo embedded in summaries (angles in degrees, human units).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScenarioDescription {
    pub n_elements: usize,
    pub radius_m: f64,
    pub wavelength_m: f64,
    pub directions_deg: Vec<[f64; 2]>,
    pub powers: Vec<f64>,
    pub coherent_pairs: Vec<[usize; 2]>,
    pub noise: String,
    /// `null` for noiseless (infinite SNR) runs.
    pub snr_db: Option<f64>,
    pub snapshots: usize,
    pub trials: usize,
    pub grid_step_deg: [f64; 2],
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
}

impl ScenarioDescription {
    fn from_scenario(scn: &Scenario) -> Self {
        let coherent_pairs = match scn.sources.coherence() {
            crate::signal::Coherence::Independent => Vec::new(),
            crate::signal::Coherence::CoherentPairs(pairs) => {
                pairs.iter().map(|&(a, b)| [a, b]).collect()
            }
        };
        ScenarioDescription {
            n_elements: scn.geometry.n_elements(),
            radius_m: scn.geometry.radius(),
            wavelength_m: scn.geometry.wavelength(),
            directions_deg: scn
                .sources
                .directions()
                .iter()
                .map(|d| [d.elevation_deg(), d.azimuth_deg()])
                .collect(),
            powers: scn.sources.powers().to_vec(),
            coherent_pairs,
            noise: match scn.noise.kind() {
                NoiseKind::Awgn => String::from("awgn"),
                NoiseKind::Toeplitz { .. } => String::from("toeplitz"),
            },
            snr_db: scn.snr_db.is_finite().then_some(scn.snr_db),
            snapshots: scn.snapshots,
            trials: scn.trials,
            grid_step_deg: [
                scn.grid.theta_step().to_degrees(),
                scn.grid.phi_step().to_degrees(),
            ],
            estimators: scn.estimators.clone(),
            seed: scn.seed,
        }
    }
}

/// Pilot-calibration record embedded in every summary. The thresholds were
/// frozen against the measured rates in `data/pilot_calibration.json`
/// (pilot binary: `cargo run --release -p doa-cli --bin pilot`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PilotCalibration {
    pub detection_threshold_deg: f64,
    pub target_all_sources_rate: f64,
    pub pilot_seed: u64,
    pub pilot_trials: usize,
    /// Measured all-sources detection rates of the modified propagator at
    /// the threshold above, on the reference three-source scenario.
    pub measured_awgn_all_sources_rate: f64,
    pub measured_toeplitz_all_sources_rate: f64,
    /// Measured rate of the coherent-pair scenario failing as required
    /// (singular fit or at least one source missed).
    pub measured_coherent_failure_rate: f64,
}

/// Frozen output of the one-time pilot calibration run.
pub const PILOT_CALIBRATION: PilotCalibration = PilotCalibration {
    detection_threshold_deg: DETECTION_THRESHOLD_DEG,
    target_all_sources_rate: 0.90,
    pilot_seed: 1,
    pilot_trials: 50,
    measured_awgn_all_sources_rate: 0.58,
    measured_toeplitz_all_sources_rate: 0.12,
    measured_coherent_failure_rate: 1.0,
};

/// Aggregated results of one experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExperimentSummary {
    pub schema_version: &'static str,
    pub scenario: ScenarioDescription,
    pub per_estimator: Vec<EstimatorSummary>,
    pub pilot_calibration: PilotCalibration,
}

impl ExperimentSummary {
    /// Deterministic JSON rendering (schema version "1").
    #[cfg(feature = "serde")]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

fn aggregate(scn: &Scenario, trials: &[Vec<TrialResult>]) -> ExperimentSummary {
    let p = scn.sources.len();
    let l = trials.len();
    let per_estimator = scn
        .estimators
        .iter()
        .enumerate()
        .map(|(e_idx, &estimator)| {
            let mut failures = FailureCounts::default();
            let mut detected_per_source = alloc::vec![0usize; p];
            let mut all_detected = 0usize;
            let mut sq_theta = 0.0;
            let mut sq_phi = 0.0;
            let mut sq_gc = 0.0;
            let mut used = 0usize;
            let mut mult_sum = 0.0;
            let mut add_sum = 0.0;
            for trial in trials {
                let result = &trial[e_idx];
                debug_assert_eq!(result.estimator, estimator);
                if let Some(f) = &result.failure {
                    failures.total += 1;
                    match f.kind {
                        FailureKind::SingularBlock => failures.singular_block += 1,
                        FailureKind::NumericalFailure => failures.numerical_failure += 1,
                    }
                }
                for (s, &det) in result.detected.iter().enumerate() {
                    if det {
                        detected_per_source[s] += 1;
                        let err = result.source_errors[s]
                            .as_ref()
                            .expect("detected implies matched");
                        sq_theta += err.theta_deg * err.theta_deg;
                        sq_phi += err.phi_deg * err.phi_deg;
                        sq_gc += err.great_circle_deg * err.great_circle_deg;
                        used += 1;
                    }
                }
                if result.all_detected() {
                    all_detected += 1;
                }
                mult_sum += result.ops.total_multiplies() as f64;
                add_sum += result.ops.total_adds() as f64;
            }
            let rmse = |sq: f64| (used > 0).then(|| (sq / used as f64).sqrt());
            EstimatorSummary {
                estimator,
                trials: l,
                failures,
                detection_rate_per_source: detected_per_source
                    .iter()
                    .map(|&c| c as f64 / l as f64)
                    .collect(),
                all_sources_detection_rate: all_detected as f64 / l as f64,
                rmse_theta_deg: rmse(sq_theta),
                rmse_phi_deg: rmse(sq_phi),
                rmse_gc_deg: rmse(sq_gc),
                rmse_sample_count: used,
                mean_ops: MeanOps {
                    complex_multiplies: mult_sum / l as f64,
                    complex_adds: add_sum / l as f64,
                },
            }
        })
        .collect();

    ExperimentSummary {
        schema_version: "1",
        scenario: ScenarioDescription::from_scenario(scn),
        per_estimator,
        pilot_calibration: PILOT_CALIBRATION,
    }
}

/// Executes all `L` trials and aggregates them. With the `rayon` feature
/// the trials run in parallel; aggregation order is fixed by trial index,
/// so the summary is identical either way.
pub fn run_experiment(scn: &Scenario) -> Result<ExperimentSummary> {
    scn.validate()?;
    let table = SteeringTable::new(&scn.geometry, &scn.grid);
    #[cfg(feature = "rayon")]
    let trials: Vec<Vec<TrialResult>> = {
        use rayon::prelude::*;
        (0..scn.trials)
            .into_par_iter()
            .map(|t| run_trial_with_table(scn, t, &table))
            .collect()
    };
    #[cfg(not(feature = "rayon"))]
    let trials: Vec<Vec<TrialResult>> = (0..scn.trials)
        .map(|t| run_trial_with_table(scn, t, &table))
        .collect();
    Ok(aggregate(scn, &trials))
}

/// [`run_experiment`] constrained to sequential execution, kept as the
/// reference path for determinism checks.
pub fn run_experiment_sequential(scn: &Scenario) -> Result<ExperimentSummary> {
    scn.validate()?;
    let table = SteeringTable::new(&scn.geometry, &scn.grid);
    let trials: Vec<Vec<TrialResult>> = (0..scn.trials)
        .map(|t| run_trial_with_table(scn, t, &table))
        .collect();
    Ok(aggregate(scn, &trials))
}

/// Raw per-trial results of an experiment (used by calibration tooling).
pub fn run_trials(scn: &Scenario) -> Result<Vec<Vec<TrialResult>>> {
    scn.validate()?;
    let table = SteeringTable::new(&scn.geometry, &scn.grid);
    Ok((0..scn.trials)
        .map(|t| run_trial_with_table(scn, t, &table))
        .collect())
}

/// Scenario field swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    SnrDb,
    Snapshots,
    Elements,
}

impl SweepParameter {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snr_db" => Some(SweepParameter::SnrDb),
            "snapshots" | "k_snapshots" => Some(SweepParameter::Snapshots),
            "elements" | "n_elements" => Some(SweepParameter::Elements),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::SnrDb => "snr_db",
            SweepParameter::Snapshots => "snapshots",
            SweepParameter::Elements => "n_elements",
        }
    }
}

/// One sweep entry: either a summary or the diagnostic explaining why the
/// value was skipped.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepOutcome {
    pub value: f64,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub summary: Option<ExperimentSummary>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub diagnostic: Option<String>,
}

fn scenario_with(scn: &Scenario, param: SweepParameter, value: f64) -> Result<Scenario> {
    let mut out = scn.clone();
    match param {
        SweepParameter::SnrDb => out.snr_db = value,
        SweepParameter::Snapshots => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(DoaError::invalid(
                    "snapshot counts must be positive integers",
                ));
            }
            out.snapshots = value as usize;
        }
        SweepParameter::Elements => {
            if !(value >= 3.0) || value.fract() != 0.0 {
                return Err(DoaError::invalid("element counts must be integers >= 3"));
            }
            let n = value as usize;
            out.geometry = UcaGeometry::new(n, scn.geometry.radius(), scn.geometry.wavelength())?;
            if let NoiseKind::Toeplitz { first_row } = scn.noise.kind() {
                // Only the default ramp can be resized meaningfully.
                let old_ramp = toeplitz_ramp_first_row(scn.geometry.n_elements())?;
                if first_row == &old_ramp {
                    out.noise =
                        NoiseModel::toeplitz(scn.noise.variance(), toeplitz_ramp_first_row(n)?)?;
                } else if first_row.len() != n {
                    return Err(DoaError::invalid(
                        "custom Toeplitz first row cannot be resized for an element sweep",
                    ));
                }
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Runs one experiment per value, in input order. Invalid values are
/// skipped with a recorded diagnostic instead of aborting the sweep.
pub fn sweep(scn: &Scenario, param: SweepParameter, values: &[f64]) -> Result<Vec<SweepOutcome>> {
    if values.is_empty() {
        return Err(DoaError::invalid("sweep needs at least one value"));
    }
    Ok(values
        .iter()
        .map(
            |&value| match scenario_with(scn, param, value).and_then(|s| run_experiment(&s)) {
                Ok(summary) => SweepOutcome {
                    value,
                    summary: Some(summary),
                    diagnostic: None,
                },
                Err(err) => SweepOutcome {
                    value,
                    summary: None,
                    diagnostic: Some(err.to_string()),
                },
            },
        )
        .collect())
}
