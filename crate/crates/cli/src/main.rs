#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;

use commands::{BasesArgs, ExperimentArgs, KinoformArgs, SearchArgs, TomographyArgs, UsageError};

/// Mutually unbiased bases: construction, hologram simulation, simulated
/// prepare-and-measure experiments and tomography.
#[derive(Debug, Parser)]
#[command(name = "mublab", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "MUBLAB_OUT", default_value = "mublab-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a built-in MUB set and its verification report.
    Bases(BasesArgs),
    /// Render the kinoform for one state, optionally simulating its output.
    Kinoform(KinoformArgs),
    /// Simulate the 18x18 prepare-and-measure matrix with shot noise.
    Experiment(ExperimentArgs),
    /// Reconstruct density matrices from counts or from simulated data.
    Tomography(TomographyArgs),
    /// Numerically search for unbiased vectors or complete MUB sets.
    Search(SearchArgs),
    /// Re-hash the files listed in a manifest.
    Verify {
        /// Directory holding `manifest.json`; defaults to the output directory.
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bases(args) => commands::bases(&cli.out, args),
        Command::Kinoform(args) => commands::kinoform(&cli.out, args),
        Command::Experiment(args) => commands::experiment(&cli.out, args),
        Command::Tomography(args) => commands::tomography(&cli.out, args),
        Command::Search(args) => commands::search(&cli.out, args),
        Command::Verify { dir } => commands::verify(&dir.unwrap_or(cli.out)),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
