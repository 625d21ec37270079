//! `sfcast`: command-line front end for the temperature forecasting engine.
//!
//! Exit codes are a stable contract for scripting:
//! 0 success, 1 internal error, 2 input/config error, 3 numerical failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfcast_core::data::DEFAULT_MISSING_THRESHOLD;
use sfcast_core::MissingPolicy;

#[derive(Parser)]
#[command(
    name = "sfcast",
    version,
    about = "Train, evaluate, and compare daily-temperature forecasting models"
)]
struct Cli {
    /// Keep stdout machine-readable only; progress text goes to stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a temperature CSV and report ingestion statistics as JSON.
    Ingest(IngestArgs),
    /// Train the CNN-LSTM forecaster and write a model file plus loss curve.
    Train(TrainArgs),
    /// Score a saved model on a dataset's chronological test split.
    Evaluate(EvaluateArgs),
    /// Predict the next value from one window of recent observations.
    Predict(PredictArgs),
    /// Train and score all four comparison models on identical data.
    Compare(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input CSV with Region,Country,State,City,Month,Day,Year,AvgTemperature.
    csv_path: PathBuf,
    /// Write the stats JSON here as well as to stdout.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Temperatures at or below this value count as missing.
    #[arg(long, default_value_t = DEFAULT_MISSING_THRESHOLD)]
    missing_threshold: f64,
}

/// Flags shared by every command that consumes a series.
#[derive(Args, Clone)]
struct SourceArgs {
    /// Input CSV (omit when using --synthetic).
    csv_path: Option<PathBuf>,
    /// Use a seeded synthetic series instead of a CSV.
    #[arg(long)]
    synthetic: bool,
    /// City to select: a full region/country/state/city key or a city name.
    #[arg(long)]
    city: Option<String>,
    /// Missing-value policy applied while cleaning.
    #[arg(long, default_value = "interpolate")]
    missing: MissingPolicy,
    /// Temperatures at or below this value count as missing.
    #[arg(long, default_value_t = DEFAULT_MISSING_THRESHOLD)]
    missing_threshold: f64,
    /// Length of the synthetic series.
    #[arg(long, default_value_t = 4000)]
    length: usize,
    /// Noise standard deviation of the synthetic series.
    #[arg(long, default_value_t = 2.25)]
    noise_std: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Input window length in timesteps.
    #[arg(long, default_value_t = 60)]
    window: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Master seed for data synthesis, init, and shuffling; random if omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Chronological train fraction.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Stop early after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value = "model.sfmodel.json")]
    model_out: PathBuf,
    /// Loss-curve CSV path; defaults to the model path with a .curve.csv suffix.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved .sfmodel.json file.
    model_path: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Must match the model's window when given.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Seed for the synthetic source.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report JSON here as well as to stdout.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved .sfmodel.json file.
    model_path: PathBuf,
    /// Comma-separated recent observations, exactly one window long.
    #[arg(long, conflicts_with = "input_file")]
    input: Option<String>,
    /// File of observations (whitespace/comma/newline separated).
    #[arg(long)]
    input_file: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 60)]
    window: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Master seed (data synthesis; also the training seed when --seeds is
    /// not given). Random if omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Comma-separated training seeds; reports per-model mean and spread.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Write the aligned text table here.
    #[arg(long)]
    table_out: Option<PathBuf>,
}

/// Command outcome mapped onto the exit-code contract.
pub enum CliError {
    Input(String),
    Numerical(String),
    Internal(String),
}

impl From<sfcast_core::Error> for CliError {
    fn from(e: sfcast_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else if e.is_numerical_error() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::Internal(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

pub type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args, quiet),
        Command::Train(args) => commands::train(args, quiet),
        Command::Evaluate(args) => commands::evaluate(args, quiet),
        Command::Predict(args) => commands::predict(args, quiet),
        Command::Compare(args) => commands::compare(args, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
