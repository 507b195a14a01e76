//! `kgs`: periodic standing waves of Klein-Gordon-Schrodinger systems.
//!
//! Exit codes: 0 success, 1 i/o error, 2 invalid configuration or missing
//! inputs, 3 numerical failure, 4 a verified claim failed.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::evolve::{EvolveOptions, Perturbation};
use crate::config::{load_file, Overrides};
use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "kgs",
    version,
    about = "Standing waves of Klein-Gordon-Schrodinger systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the wave profile: wave.csv and wave.json
    Wave,
    /// Eigenvalue counts of the linearized operators: spectrum.json
    Spectrum {
        /// Replace the wave potential by zero and compare with Fourier symbols
        #[arg(long)]
        free: bool,
    },
    /// Convexity of d(c), instability index and J L spectrum: stability.json
    Stability,
    /// Evolve a perturbed wave: series.csv, series.gp, evolve.json, growth.json
    Evolve {
        #[arg(long = "perturb", value_enum)]
        perturbation: Option<Perturbation>,
        /// Fit the exponential growth rate of the orbital distance
        #[arg(long, conflicts_with = "no_fit")]
        fit: bool,
        #[arg(long)]
        no_fit: bool,
    },
    /// Aggregate the reports of the output directory into manifest.json
    Report,
}

fn report_dir(o: &Overrides) -> CliResult<PathBuf> {
    if let Some(d) = &o.output_dir {
        return Ok(d.clone());
    }
    let from_file = match &o.config {
        Some(p) => load_file(p)?.output_dir,
        None => None,
    };
    Ok(from_file.unwrap_or_else(|| "out".into()))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Report => commands::report::run(&report_dir(&cli.overrides)?),
        cmd => {
            let cfg = cli.overrides.resolve()?;
            match cmd {
                Command::Wave => commands::wave::run(&cfg),
                Command::Spectrum { free } => commands::spectrum::run(&cfg, *free),
                Command::Stability => commands::stability::run(&cfg),
                Command::Evolve {
                    perturbation,
                    fit,
                    no_fit,
                } => {
                    let fit = match (fit, no_fit) {
                        (true, _) => Some(true),
                        (_, true) => Some(false),
                        _ => None,
                    };
                    commands::evolve::run(
                        &cfg,
                        EvolveOptions {
                            perturbation: *perturbation,
                            fit,
                        },
                    )
                }
                Command::Report => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
