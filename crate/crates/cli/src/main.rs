//! `doa` — scenario files in, spectra and Monte Carlo metrics out.
//!
//! Exit codes: 0 success, 1 usage/IO/validation problems, 2 numerical
//! failures (singular covariance blocks, non-converging decompositions).
//! Numerical failures also print a machine-readable JSON object to stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use doa_cli::scenario::ScenarioFile;
use doa_cli::snapshots::{read_snapshots, write_snapshots};
use doa_core::covariance::OpCount;
use doa_core::error::DoaError;
use doa_core::estimators::EstimatorKind;
use doa_core::experiments::{
    estimate_on_snapshots, run_experiment, sweep, Scenario, SweepParameter,
};
use doa_core::signal::{synthesize_snapshots, SnapshotMatrix};
use doa_core::spectrum::PeakSet;

#[derive(Parser)]
#[command(
    name = "doa",
    version,
    about = "2-D direction-of-arrival estimation on uniform circular arrays"
)]
struct Cli {
    /// Override the scenario RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the scan-grid spacing, degrees on both axes.
    #[arg(long, global = true, value_name = "DEG")]
    grid_deg: Option<f64>,

    /// Override the estimator set (repeatable): mpm, pm, music.
    #[arg(long = "estimator", global = true, value_name = "NAME")]
    estimators: Vec<String>,

    /// Output path (defaults to stdout where the format allows).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize snapshots and write the binary container to --out.
    Simulate {
        /// Scenario TOML file.
        scenario: PathBuf,
    },
    /// Run the estimators on synthesized or pre-recorded snapshots.
    Estimate {
        scenario: PathBuf,
        /// Read snapshots from a container instead of synthesizing.
        #[arg(long, value_name = "PATH")]
        snapshots: Option<PathBuf>,
        /// Write the scanned spectrum as CSV (single estimator only).
        #[arg(long, value_name = "PATH")]
        spectrum_out: Option<PathBuf>,
        /// Write the peaks JSON here instead of --out/stdout.
        #[arg(long, value_name = "PATH")]
        peaks_out: Option<PathBuf>,
    },
    /// Run the full Monte Carlo experiment and emit the summary JSON.
    Experiment { scenario: PathBuf },
    /// Repeat the experiment over a parameter list.
    Sweep {
        scenario: PathBuf,
        /// One of: snr_db, snapshots, n_elements.
        #[arg(long, value_name = "NAME")]
        param: String,
        /// Comma-separated values, e.g. "0,10,20".
        #[arg(long, value_name = "LIST")]
        values: String,
    },
}

enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
    Numerical { kind: &'static str, message: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DoaError> for CliError {
    fn from(e: DoaError) -> Self {
        match &e {
            DoaError::SingularBlock { .. } => CliError::Numerical {
                kind: "singular_block",
                message: e.to_string(),
            },
            DoaError::NumericalFailure(_) => CliError::Numerical {
                kind: "numerical_failure",
                message: e.to_string(),
            },
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err.exit_code();
            match err {
                CliError::Usage(m) => eprintln!("usage error: {m}"),
                CliError::Validation(m) => eprintln!("validation error: {m}"),
                CliError::Io(m) => eprintln!("io error: {m}"),
                CliError::Numerical { kind, message } => {
                    #[derive(Serialize)]
                    struct ErrorBody<'a> {
                        kind: &'a str,
                        message: &'a str,
                    }
                    #[derive(Serialize)]
                    struct ErrorDoc<'a> {
                        error: ErrorBody<'a>,
                    }
                    let doc = ErrorDoc {
                        error: ErrorBody {
                            kind,
                            message: &message,
                        },
                    };
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&doc).expect("error json")
                    );
                    eprintln!("numerical failure: {message}");
                }
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let estimator_override = cli
        .estimators
        .iter()
        .map(|name| {
            EstimatorKind::parse(name)
                .ok_or_else(|| CliError::Usage(format!("unknown estimator {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    match &cli.command {
        Command::Simulate { scenario } => {
            let scn = load_scenario(scenario, &cli, &estimator_override)?;
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| CliError::Usage("simulate requires --out <PATH>".into()))?;
            let x = synthesize_snapshots(
                &scn.geometry,
                &scn.sources,
                &scn.noise,
                scn.snapshots,
                scn.snr_db,
                scn.seed,
            )?;
            write_snapshots(out, &x)?;
            eprintln!(
                "wrote {} elements x {} snapshots to {}",
                x.n_elements(),
                x.n_snapshots(),
                out.display()
            );
            Ok(())
        }
        Command::Estimate {
            scenario,
            snapshots,
            spectrum_out,
            peaks_out,
        } => {
            let scn = load_scenario(scenario, &cli, &estimator_override)?;
            let x = match snapshots {
                Some(path) => read_snapshots(path, &scn.geometry)?,
                None => synthesize_snapshots(
                    &scn.geometry,
                    &scn.sources,
                    &scn.noise,
                    scn.snapshots,
                    scn.snr_db,
                    scn.seed,
                )?,
            };
            cmd_estimate(
                &scn,
                &x,
                spectrum_out.as_deref(),
                peaks_out.as_deref(),
                cli.out.as_deref(),
            )
        }
        Command::Experiment { scenario } => {
            let scn = load_scenario(scenario, &cli, &estimator_override)?;
            let summary = run_experiment(&scn)?;
            emit(cli.out.as_deref(), &summary.to_json())
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => {
            let scn = load_scenario(scenario, &cli, &estimator_override)?;
            let param = SweepParameter::parse(param).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown sweep parameter {param:?} (expected snr_db|snapshots|n_elements)"
                ))
            })?;
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad sweep value {v:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let outcomes = sweep(&scn, param, &values)?;

            #[derive(Serialize)]
            struct SweepDoc<'a> {
                schema_version: &'static str,
                parameter: &'static str,
                outcomes: &'a [doa_core::experiments::SweepOutcome],
            }
            let doc = SweepDoc {
                schema_version: "1",
                parameter: param.as_str(),
                outcomes: &outcomes,
            };
            emit(
                cli.out.as_deref(),
                &serde_json::to_string_pretty(&doc).expect("sweep json"),
            )
        }
    }
}

fn load_scenario(
    path: &Path,
    cli: &Cli,
    estimator_override: &[EstimatorKind],
) -> Result<Scenario, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file = ScenarioFile::parse(&text).map_err(CliError::Validation)?;
    file.to_scenario(cli.seed, cli.grid_deg, estimator_override)
        .map_err(CliError::Validation)
}

#[derive(Serialize)]
struct PeakJson {
    theta_deg: f64,
    phi_deg: f64,
    power: f64,
    azimuth_indeterminate: bool,
}

#[derive(Serialize)]
struct StageJson {
    label: &'static str,
    complex_multiplies: u64,
    complex_adds: u64,
}

#[derive(Serialize)]
struct OpsJson {
    complex_multiplies: u64,
    complex_adds: u64,
    stages: Vec<StageJson>,
}

#[derive(Serialize)]
struct PeaksDoc {
    estimator: &'static str,
    peaks: Vec<PeakJson>,
    ops: OpsJson,
}

fn peaks_doc(estimator: EstimatorKind, peaks: &PeakSet, ops: &OpCount) -> PeaksDoc {
    PeaksDoc {
        estimator: estimator.as_str(),
        peaks: peaks
            .iter()
            .map(|p| PeakJson {
                theta_deg: p.direction.elevation_deg(),
                phi_deg: p.direction.azimuth_deg(),
                power: p.power,
                azimuth_indeterminate: p.azimuth_indeterminate,
            })
            .collect(),
        ops: OpsJson {
            complex_multiplies: ops.total_multiplies(),
            complex_adds: ops.total_adds(),
            stages: ops
                .stages()
                .iter()
                .map(|s| StageJson {
                    label: s.label,
                    complex_multiplies: s.complex_multiplies,
                    complex_adds: s.complex_adds,
                })
                .collect(),
        },
    }
}

fn cmd_estimate(
    scn: &Scenario,
    x: &SnapshotMatrix,
    spectrum_out: Option<&Path>,
    peaks_out: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if spectrum_out.is_some() && scn.estimators.len() != 1 {
        return Err(CliError::Usage(
            "--spectrum-out needs exactly one estimator (use --estimator)".into(),
        ));
    }

    let mut docs = Vec::new();
    for &estimator in &scn.estimators {
        let outcome = estimate_on_snapshots(x, scn.sources.len(), &scn.grid, estimator)?;
        if let Some(path) = spectrum_out {
            fs::write(path, outcome.spectrum.to_csv())?;
        }
        docs.push(peaks_doc(estimator, &outcome.peaks, &outcome.ops));
    }

    let json = if docs.len() == 1 {
        serde_json::to_string_pretty(&docs[0]).expect("peaks json")
    } else {
        #[derive(Serialize)]
        struct MultiDoc<'a> {
            results: &'a [PeaksDoc],
        }
        serde_json::to_string_pretty(&MultiDoc { results: &docs }).expect("peaks json")
    };
    emit(peaks_out.or(out), &json)
}

fn emit(path: Option<&Path>, payload: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, payload.as_bytes())?;
            Ok(())
        }
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}
