//! `dirguide`: generate directional-guidance corpora and benchmark oracles.
//!
//! Exit codes: 0 success, 1 configuration error, 2 oracle unreachable, 3 write failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{assemble, evaluate, generate, perturb, stats};
use config::FileConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dirguide", version, about = "Directional-guidance VQA corpus generator and oracle benchmark")]
#[command(after_help = "Exit codes: 0 success, 1 configuration error, 2 oracle unreachable, 3 write failure.\n\
                        The http oracle reads its API key from ORACLE_API_KEY unless --api-key-env says otherwise.")]
struct Cli {
    /// TOML settings file; keys mirror the long flags (e.g. seed = 7, range = "0.1:0.9")
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a guidance-labeled training corpus from a grounded VQA manifest
    Generate(generate::GenerateArgs),
    /// Score an oracle on a labeled benchmark
    Evaluate(evaluate::EvaluateArgs),
    /// Crop one image and print the kept rectangle as x,y,w,h
    Perturb(perturb::PerturbArgs),
    /// Print class counts and shares of a manifest or corpus
    Stats(stats::StatsArgs),
    /// Join reframing, unanswerable and answerable manifests into a benchmark
    Assemble(assemble::AssembleArgs),
    /// Convert VizWiz annotations (and grounding polygons) into a manifest
    Convert(assemble::ConvertArgs),
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(a) => generate::run(a, &file),
        Command::Evaluate(a) => evaluate::run(a, &file),
        Command::Perturb(a) => perturb::run(a),
        Command::Stats(a) => stats::run(a),
        Command::Assemble(a) => assemble::run_assemble(a),
        Command::Convert(a) => assemble::run_convert(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
