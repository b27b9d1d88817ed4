//! Command-line front end: run config-driven analyses of single-band
//! non-Hermitian chains and re-plot their CSV artifacts.

mod config;
mod csvio;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// What went wrong, mapped onto the exit-code contract: 2 for rejected
/// input, 3 for a computation that could not produce a trustworthy answer.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<nhtop::Error> for CliError {
    fn from(e: nhtop::Error) -> CliError {
        use nhtop::Error::*;
        match e {
            InvalidParams(_) | SizeTooSmall { .. } | NonPositiveGammaEff(_) => {
                CliError::Validation(e.to_string())
            }
            OriginOnCurve(_)
            | NonIntegerWinding(..)
            | DegenerateSpectrum
            | AmbiguousSeparation { .. }
            | NotAtExceptionalPoint(_)
            | EtaUnit(_)
            | SingularAtProbe { .. }
            | NumericalFailure(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nhtop",
    version,
    about = "Point-gap topology, zero modes, response, and disorder for \
             single-band non-Hermitian chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses described by a TOML config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Override a config value by dotted path, e.g. `analysis.n=80`,
        /// `model.theta=[0.0]`, `analysis=winding`.  May repeat.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
    /// Draw an SVG chart from CSV artifacts written by `run`.
    Plot {
        /// Input CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Chart kind: spectrum, bands, profile, heatmap, histogram, sweep.
        #[arg(long)]
        kind: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, set } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                CliError::Validation(format!("cannot read {}: {e}", config.display()))
            })?;
            let resolved = config::load(&text, &set)?;
            run::run(&resolved)
        }
        Command::Plot { inputs, kind, out } => {
            let kind: plot::PlotKind = kind.parse()?;
            let svg = plot::plot_files(kind, &inputs)?;
            std::fs::write(&out, svg).map_err(|e| {
                CliError::Validation(format!("cannot write {}: {e}", out.display()))
            })?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
