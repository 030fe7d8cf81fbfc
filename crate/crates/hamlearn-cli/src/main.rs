//! `hamlearn`: run dynamics-learning experiments from the command line.
//!
//! One pipeline per invocation. All randomness derives from --seed, so a
//! rerun with the same flags reproduces every artifact byte for byte
//! (timings.json aside).

use clap::{Args, Parser, Subcommand};
use hamlearn_core::pipeline::{run, ExperimentConfig, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hamlearn",
    version,
    about = "Learn local Heisenberg dynamics from single-copy measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a measurement dataset and write dataset.bin
    Simulate(RunArgs),
    /// Estimate local operators from an existing dataset
    Learn(RunArgs),
    /// Learn, sew the channel, and score it against the dense oracle
    Evaluate(RunArgs),
    /// Compare learned mean-value predictions with exact dynamics
    Verify(RunArgs),
    /// Fit the observable-basis classifier on oracle labels
    Classify(RunArgs),
    /// Learn from noisy data and report prediction gaps
    BenchNoise(RunArgs),
    /// simulate + learn + evaluate in one pass
    Full(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Evolution plan document (JSON)
    #[arg(long)]
    plan: PathBuf,
    /// Top-level seed; every substream derives from it
    #[arg(long)]
    seed: u64,
    /// Measurement record count; defaults to the guarantee formula
    #[arg(long)]
    shots: Option<u64>,
    /// Target accuracy for the default shot count
    #[arg(long)]
    epsilon: Option<f64>,
    /// Failure probability for the default shot count
    #[arg(long)]
    delta: Option<f64>,
    /// Depolarizing rate applied after every step
    #[arg(long)]
    gamma: Option<f64>,
    /// Fixed truncation order (bypasses the tail-bound formula)
    #[arg(long = "trunc-m")]
    trunc_m: Option<u32>,
    /// Constant-time regime split parameter
    #[arg(long)]
    kappa: Option<f64>,
    /// Worker thread cap
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; falls back to $HAMLEARN_OUT, then ./out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset path override (default: OUT/dataset.bin)
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn to_config(mode: Mode, args: RunArgs) -> ExperimentConfig {
    let out_dir = args
        .out
        .or_else(|| std::env::var_os("HAMLEARN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    ExperimentConfig {
        mode,
        plan_path: args.plan,
        seed: args.seed,
        shots: args.shots,
        epsilon: args.epsilon,
        delta: args.delta,
        gamma: args.gamma,
        trunc_m: args.trunc_m,
        kappa: args.kappa,
        threads: args.threads,
        out_dir,
        dataset_path: args.dataset,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Learn(a) => (Mode::Learn, a),
        Command::Evaluate(a) => (Mode::Evaluate, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Classify(a) => (Mode::Classify, a),
        Command::BenchNoise(a) => (Mode::BenchNoise, a),
        Command::Full(a) => (Mode::Full, a),
    };
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("hamlearn: failed to cap worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let config = to_config(mode, args);
    match run(&config) {
        Ok(artifacts) => {
            println!(
                "{} complete: {} artifact(s) under {}",
                config.mode.name(),
                artifacts.written.len(),
                config.out_dir.display()
            );
            for path in &artifacts.written {
                println!("  {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hamlearn {} failed: {e}", config.mode.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
