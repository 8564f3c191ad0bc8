//! `klgp`: build KL expansions, fit reduced-rank GP regressions, run the
//! Bayesian hyperparameter marginalization and the benchmark suites.
//!
//! Exit status is 0 on success, 2 for usage, configuration and input
//! errors, and 3 when a computation fails numerically. No output file is
//! written unless the whole command succeeds.

mod bench;
mod commands;
mod config;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<klgp::Error> for CliError {
    fn from(e: klgp::Error) -> Self {
        use klgp::Error::*;
        match e {
            Contract(_)
            | OutsideDomain { .. }
            | RowOutsideDomain { .. }
            | Format { .. }
            | UnsupportedSmoothness(_) => CliError::Usage(e.to_string()),
            NotSymmetric { .. }
            | NotPsd { .. }
            | QuadratureDepth { .. }
            | NoConvergence { .. }
            | ResourceGuard(_)
            | IllPosedEvidence { .. }
            | Underflow(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "klgp",
    version,
    about = "Reduced-rank Gaussian processes via Karhunen-Loève expansions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// TOML file of `key = value` settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a KL expansion and write it with its eigenvalue table.
    KlBuild(Settings),
    /// Fit a reduced-rank regression and predict at query points.
    FitPredict(Settings),
    /// Marginalize the amplitude, noise and lengthscale by quadrature.
    Bayes(Settings),
    /// Run a benchmark suite and write its table.
    Bench {
        /// se-1d, matern-1d, alg1-vs-alg3, se-2d or bayes.
        suite: Option<String>,
        /// Omit the wall-time column so the table is reproducible.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a synthetic dataset.
    Synth(Settings),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::KlBuild(s) => commands::kl_build(&load("kl-build", &s, &[])?),
        Command::FitPredict(s) => commands::fit_predict(&load("fit-predict", &s, &[])?),
        Command::Bayes(s) => commands::bayes(&load("bayes", &s, &[])?),
        Command::Bench {
            suite,
            no_timing,
            settings,
        } => {
            let mut extra = Vec::new();
            if let Some(suite) = suite {
                extra.push(format!("suite={suite}"));
            }
            if no_timing {
                extra.push("timing=false".to_string());
            }
            bench::run(&load("bench", &settings, &extra)?)
        }
        Command::Synth(s) => commands::synth(&load("synth", &s, &[])?),
    }
}

/// Command-line flags win over `--set`, which wins over the config file.
fn load(
    command: &str,
    settings: &Settings,
    extra: &[String],
) -> Result<config::RunConfig, CliError> {
    let mut overrides = settings.set.clone();
    overrides.extend_from_slice(extra);
    config::load(command, settings.config.as_deref(), &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
