//! `thermosig`: simulate station datasets, fit load coefficients and report
//! load signatures.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermosig_core::Basis;

use crate::config::RunConfig;
use crate::error::CliError;

const THREADS_VAR: &str = "THERMOSIG_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "thermosig",
    version,
    about = "Subway station HVAC load signatures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (dataset.csv, truth.json).
    Simulate(Opts),
    /// Fit the load coefficients (fit.json, error_surface.csv).
    Fit(Opts),
    /// Decompose load for a given theta (signature.csv, summary.json).
    Signature(Opts),
    /// Compare raw and integrated fits against a known truth (eval.json).
    Eval(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Sensor CSV to read.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// fit.json or truth.json supplying theta (the truth, for eval).
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Fit on per-step rows.
    #[arg(long, conflicts_with = "integrated")]
    raw: bool,
    /// Fit on running sums of the rows (default).
    #[arg(long)]
    integrated: bool,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn basis(&self) -> Basis {
        Basis::from_flag(!self.raw)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required for this command")))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "{THREADS_VAR} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_VAR}: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let opts = match &cli.command {
        Command::Simulate(o) | Command::Fit(o) | Command::Signature(o) | Command::Eval(o) => o,
    };
    let config = RunConfig::load(&opts.config)?;
    let out = config.output_dir(opts.out.as_deref());
    match &cli.command {
        Command::Simulate(_) => commands::simulate_cmd(&config, &out),
        Command::Fit(o) => {
            commands::fit_cmd(&config, required(&o.dataset, "dataset")?, o.basis(), &out)
        }
        Command::Signature(o) => commands::signature_cmd(
            &config,
            required(&o.dataset, "dataset")?,
            required(&o.theta, "theta")?,
            &out,
        ),
        Command::Eval(o) => commands::eval_cmd(
            &config,
            required(&o.dataset, "dataset")?,
            required(&o.theta, "theta")?,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn basis_flags() {
        let parse = |args: &[&str]| Cli::try_parse_from(args);
        let Command::Fit(o) = parse(&["thermosig", "fit", "--config", "c.json"])
            .unwrap()
            .command
        else {
            panic!()
        };
        assert_eq!(o.basis(), Basis::Integrated);
        let Command::Fit(o) = parse(&["thermosig", "fit", "--config", "c", "--raw"])
            .unwrap()
            .command
        else {
            panic!()
        };
        assert_eq!(o.basis(), Basis::Raw);
        assert!(parse(&["thermosig", "fit", "--config", "c", "--raw", "--integrated"]).is_err());
        assert!(parse(&["thermosig", "fit"]).is_err());
    }
}
