//! `fdi`: ingest user-feature data, quantify how inferable a target dataset
//! is against a training dataset, sweep (p, K) grids, and flag new users.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O), 2 usage or configuration
//! error (including model preconditions such as p = 1/2).

mod commands;
mod kv;
mod manifest;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "fdi", version, about = "Feature-based data inferability toolkit")]
struct Cli {
    /// Base seed for every random stream (env: SEED).
    #[arg(long, global = true, env = "SEED", default_value_t = 42)]
    seed: u64,

    /// Worker threads for parallel sections; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum IngestFormat {
    Tsv,
    Snap,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Training,
    Target,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Binary,
    Distance,
    Distribution,
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    Product,
    Raw,
    LogProduct,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Unit,
    InverseFrequency,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distance,
    Distribution,
}

#[derive(Subcommand)]
enum Command {
    /// Parse input files into a canonical dataset archive.
    Ingest {
        #[arg(long, value_enum)]
        format: IngestFormat,
        /// Role recorded in the archive.
        #[arg(long, value_enum, default_value = "training")]
        role: RoleArg,
        /// Fail (exit 2) if any input line is malformed.
        #[arg(long)]
        strict: bool,
        /// Output archive directory.
        #[arg(long)]
        out: PathBuf,
        /// Input files (or directories for the snap format).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Emit user- and feature-degree histograms of an archive.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a (delta, K)-inferability condition check.
    Quantify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Model parameter p (feature preservation / sampling rate).
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        /// Slack constant for the distribution model.
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
        /// p-norm exponent for the distance model.
        #[arg(long, default_value_t = 2.0)]
        norm: f64,
        #[arg(long, value_enum, default_value = "product")]
        combiner: CombinerArg,
        #[arg(long, value_enum, default_value = "unit")]
        weights: WeightsArg,
        /// Replica pairs per pair-statistics estimate (distance model).
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Inflation factor for the distribution model's term bounds.
        #[arg(long, default_value_t = 1.0)]
        slack: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a (p, K) grid, averaging repetitions per cell.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// Key-value config file, or a manifest.json from a previous run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Comma-separated p grid, e.g. "0.5,0.6,0.7".
        #[arg(long)]
        p: Option<String>,
        /// Comma-separated K grid; entries are counts ("10") or fractions
        /// of n ("0.05" or "0.05n").
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum)]
        combiner: Option<CombinerArg>,
        #[arg(long)]
        norm: Option<f64>,
        #[arg(long, value_enum)]
        weights: Option<WeightsArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate matched-pair thresholds and classify target users as new.
    Detect {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
        /// Sampling rate for threshold estimation.
        #[arg(long, default_value_t = 0.8)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, default_value = "product")]
        combiner: CombinerArg,
        #[arg(long, default_value_t = 2.0)]
        norm: f64,
        #[arg(long, value_enum, default_value = "unit")]
        weights: WeightsArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("fdi: could not configure {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fdi: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
