//! `cardioforge`: simulate, fit, train GANs, classify and evaluate heartbeats.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 on bad
//! input or usage.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use cardioforge_core::beats::Label;
use cardioforge_core::gan::Regime;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cardioforge",
    version,
    about = "Simulator-guided ECG heartbeat synthesis and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate beats from the ODE simulator with sampled wave parameters.
    Simulate(SimulateArgs),
    /// Write a seeded four-class synthetic train/test corpus.
    Corpus(CorpusArgs),
    /// Fit wave parameters to every beat of one class.
    Fit(FitArgs),
    /// Train a class-specific GAN.
    GanTrain(GanTrainArgs),
    /// Sample beats from a trained GAN.
    GanGenerate(GanGenerateArgs),
    /// Train the heartbeat classifier, optionally with synthetic beats.
    Classify(ClassifyArgs),
    /// Per-class precision-recall evaluation of one or more classifiers.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Parameter distribution file; defaults to the standard wave parameters.
    #[arg(long)]
    eta_file: Option<PathBuf>,
    /// Only use the distribution of this class.
    #[arg(long)]
    class: Option<Label>,
    /// Beats per class.
    #[arg(long)]
    count: usize,
    /// Relative parameter noise on top of the distribution.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Train beats per class, in N,S,V,F order.
    #[arg(long, value_delimiter = ',', required = true)]
    train: Vec<usize>,
    /// Test beats per class, in N,S,V,F order.
    #[arg(long, value_delimiter = ',', required = true)]
    test: Vec<usize>,
    /// Relative spread of each class's wave parameters.
    #[arg(long, default_value_t = 0.05)]
    spread: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    beats: PathBuf,
    #[arg(long)]
    class: Label,
    /// Fit at most this many beats of the class.
    #[arg(long)]
    max_beats: Option<usize>,
    /// Objective evaluations per simplex run.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GanTrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beats: PathBuf,
    /// Class to train on; required when the beat file holds several.
    #[arg(long)]
    class: Option<Label>,
    #[arg(long)]
    eta_dist: Option<PathBuf>,
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GanGenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    /// Generated or simulated beats for the second training phase.
    #[arg(long)]
    synth: Vec<PathBuf>,
    /// Phase-one epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Trained classifier directory, optionally named as `NAME=DIR`.
    #[arg(long)]
    model: Vec<String>,
    /// Precomputed probabilities as `NAME=FILE` with columns p_N,p_S,p_V,p_F.
    #[arg(long)]
    scores: Vec<String>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Corpus(a) => commands::corpus(a),
        Command::Fit(a) => commands::fit(a),
        Command::GanTrain(a) => commands::gan_train(a),
        Command::GanGenerate(a) => commands::gan_generate(a),
        Command::Classify(a) => commands::classify(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cardioforge: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
