use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thermosig_core::ingest::{format_number, format_timestamp};
use thermosig_core::synth::{write_csv, RunDiagnostics};
use thermosig_core::{
    assemble, build_frames, grid_fit, grid_fit_with_surface, integrate, load_signature, parse_csv,
    simulate, Basis, CellEvaluation, FitResult, FrameSeries, RegressionSystem, StationConstants,
    Theta,
};

use crate::config::RunConfig;
use crate::error::CliError;

/// Contents of `truth.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub theta: Theta,
    pub constants: StationConstants,
    pub frames: usize,
    pub start: DateTime<Utc>,
    pub step: u32,
    pub seed: u64,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    basis: Basis,
    frames: usize,
}

#[derive(Debug, Serialize)]
struct Totals {
    load: f64,
    passenger: f64,
    environment: f64,
    supply: f64,
}

#[derive(Debug, Serialize)]
struct Shares {
    passenger: f64,
    environment: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    theta: Theta,
    frames: usize,
    totals: Totals,
    /// Absent when the passenger and environment totals cancel.
    shares: Option<Shares>,
    relative_error: Option<f64>,
    integrated_relative_error: Option<f64>,
    negative_new_air_frames: usize,
}

#[derive(Debug, Serialize)]
struct CoefficientErrors {
    c_p: f64,
    alpha: f64,
    beta_ac: f64,
}

impl From<[f64; 3]> for CoefficientErrors {
    fn from([c_p, alpha, beta_ac]: [f64; 3]) -> Self {
        Self {
            c_p,
            alpha,
            beta_ac,
        }
    }
}

#[derive(Debug, Serialize)]
struct EvalFit {
    theta: Theta,
    relative_error: f64,
    coefficient_errors: CoefficientErrors,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    truth: Theta,
    frames: usize,
    mode_frames_used: usize,
    raw: EvalFit,
    integrated: EvalFit,
    /// Per coefficient, whether the integrated fit is at least as close to
    /// the truth as the raw fit.
    integrated_not_worse: [bool; 3],
}

pub fn simulate_cmd(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let scenario = config.scenario()?;
    let run = simulate(&scenario)?;
    create_dir(out)?;
    let path = out.join("dataset.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::io(&path, e))?);
    write_csv(&run, &mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let truth = Truth {
        theta: scenario.theta_true,
        constants: scenario.constants,
        frames: run.truth.len(),
        start: run.truth.start,
        step: run.truth.step,
        seed: scenario.seed,
        diagnostics: run.diagnostics,
    };
    write_json(&out.join("truth.json"), &truth)
}

pub fn fit_cmd(
    config: &RunConfig,
    dataset: &Path,
    basis: Basis,
    out: &Path,
) -> Result<(), CliError> {
    let series = load_series(config, dataset)?;
    let system = assemble_system(config, &series)?;
    let (fit, surface) = grid_fit_with_surface(&system, &config.grid, basis)?;
    if fit.at_upper_bound {
        log::warn!("optimum lies on the upper bound of the search box; consider widening the grid");
    }
    create_dir(out)?;
    let report = FitReport {
        fit: &fit,
        basis,
        frames: series.len(),
    };
    write_json(&out.join("fit.json"), &report)?;
    write_surface(&out.join("error_surface.csv"), &surface)
}

pub fn signature_cmd(
    config: &RunConfig,
    dataset: &Path,
    theta_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let theta = read_theta(theta_path)?;
    let series = load_series(config, dataset)?;
    let sig = load_signature(&series, &theta, &config.constants);
    create_dir(out)?;

    let path = out.join("signature.csv");
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| CliError::io(&path, e.into());
    wtr.write_record([
        "timestamp",
        "l_total",
        "l_passenger",
        "l_environment",
        "supply",
        "residual",
        "mode",
    ])
    .map_err(csv_err)?;
    for (i, frame) in series.frames.iter().enumerate() {
        wtr.write_record([
            format_timestamp(&series.timestamp(i)),
            format_number(sig.l_total[i]),
            format_number(sig.l_passenger[i]),
            format_number(sig.l_environment[i]),
            format_number(sig.supply[i]),
            sig.residual[i].map(format_number).unwrap_or_default(),
            frame.mode.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CliError::io(&path, e))?;

    let summary = Summary {
        theta,
        frames: sig.len(),
        totals: Totals {
            load: sig.total_load(),
            passenger: sig.total_passenger(),
            environment: sig.total_environment(),
            supply: sig.total_supply(),
        },
        shares: sig.shares().map(|(passenger, environment)| Shares {
            passenger,
            environment,
        }),
        relative_error: sig.relative_error,
        integrated_relative_error: sig.integrated_relative_error,
        negative_new_air_frames: sig.negative_new_air_frames,
    };
    write_json(&out.join("summary.json"), &summary)
}

pub fn eval_cmd(
    config: &RunConfig,
    dataset: &Path,
    truth_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let truth_json = read_json(truth_path)?;
    let truth = theta_field(&truth_json, truth_path)?;
    let series = load_series(config, dataset)?;
    if let Some(frames) = truth_json.get("frames").and_then(serde_json::Value::as_u64) {
        if frames as usize != series.len() {
            return Err(CliError::Config(format!(
                "{} describes {frames} frames but the dataset has {}",
                truth_path.display(),
                series.len()
            )));
        }
    }
    if let Some(start) = truth_json.get("start").and_then(serde_json::Value::as_str) {
        let start: DateTime<Utc> = start.parse().map_err(|_| {
            CliError::Config(format!("{}: bad start timestamp", truth_path.display()))
        })?;
        if start != series.start {
            return Err(CliError::Config(format!(
                "{} starts at {} but the dataset starts at {}",
                truth_path.display(),
                format_timestamp(&start),
                format_timestamp(&series.start)
            )));
        }
    }

    let system = integrate(assemble_system(config, &series)?);
    let raw = grid_fit(&system, &config.grid, Basis::Raw)?;
    let integrated = grid_fit(&system, &config.grid, Basis::Integrated)?;
    let raw_err = raw.theta.relative_errors(&truth);
    let int_err = integrated.theta.relative_errors(&truth);
    let eval = Evaluation {
        truth,
        frames: series.len(),
        mode_frames_used: raw.mode_frames_used,
        raw: EvalFit {
            theta: raw.theta,
            relative_error: raw.relative_error,
            coefficient_errors: raw_err.into(),
        },
        integrated: EvalFit {
            theta: integrated.theta,
            relative_error: integrated.relative_error,
            coefficient_errors: int_err.into(),
        },
        integrated_not_worse: [0, 1, 2].map(|i| int_err[i] <= raw_err[i]),
    };
    create_dir(out)?;
    write_json(&out.join("eval.json"), &eval)
}

fn load_series(config: &RunConfig, dataset: &Path) -> Result<FrameSeries, CliError> {
    let records = parse_csv(dataset, &config.schema)?;
    let series = build_frames(
        &records,
        &config.constants,
        &config.mode_rule,
        &config.build_options(),
    )?;
    log::info!(
        "{}: {} frames from {}",
        dataset.display(),
        series.len(),
        format_timestamp(&series.start)
    );
    Ok(series)
}

fn assemble_system(config: &RunConfig, series: &FrameSeries) -> Result<RegressionSystem, CliError> {
    Ok(assemble(series, &config.constants, &config.mode_filter)?)
}

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn theta_field(json: &serde_json::Value, path: &Path) -> Result<Theta, CliError> {
    let value = json
        .get("theta")
        .ok_or_else(|| CliError::Config(format!("{}: missing field `theta`", path.display())))?;
    let theta: Theta = serde_json::from_value(value.clone())
        .map_err(|e| CliError::Config(format!("{}: theta: {e}", path.display())))?;
    if !theta.is_feasible() {
        return Err(CliError::Config(format!(
            "{}: theta is not feasible",
            path.display()
        )));
    }
    Ok(theta)
}

/// Reads `theta` from a `fit.json` or `truth.json`.
fn read_theta(path: &Path) -> Result<Theta, CliError> {
    theta_field(&read_json(path)?, path)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialise");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_surface(path: &PathBuf, cells: &[CellEvaluation]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| CliError::io(path, e.into());
    wtr.write_record(["pass", "c_p", "alpha", "beta_ac", "objective"])
        .map_err(csv_err)?;
    for c in cells {
        wtr.write_record([
            c.pass.to_string(),
            format_number(c.c_p),
            format_number(c.alpha),
            format_number(c.beta_ac),
            c.objective.map(format_number).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CliError::io(path, e))
}
