#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod benchmark;
mod config;
mod error;
mod extract;
mod fit;
mod gradcheck;
mod report;
mod simulate;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::Result;

/// Physical parameter estimation from observed trajectories.
#[derive(Debug, Parser)]
#[command(name = "physid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a system and write its trajectory as CSV.
    Simulate(simulate::SimulateArgs),
    /// Simulate, add observation noise, and record the truth beside the CSV.
    Synth(simulate::SynthArgs),
    /// Estimate parameters from the data described by a run config.
    Fit(fit::FitArgs),
    /// Extract one coloured curve from a chart image.
    Digitize(extract::DigitizeArgs),
    /// Spectral features (and tone-encoded speeds) of a WAV file.
    AudioFeatures(extract::AudioArgs),
    /// Compare taped gradients with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Run a synthetic benchmark suite over seeds.
    Benchmark(benchmark::BenchmarkArgs),
    /// Summarize finished runs.
    Report(report::ReportArgs),
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate::run_simulate(a),
        Command::Synth(a) => simulate::run_synth(a),
        Command::Fit(a) => fit::run(a),
        Command::Digitize(a) => extract::run_digitize(a),
        Command::AudioFeatures(a) => extract::run_audio(a),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Benchmark(a) => benchmark::run(a),
        Command::Report(a) => report::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
