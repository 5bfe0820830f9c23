//! `crossing`: synthesize data, featurize, train, predict, evaluate and
//! grid-search street-crossing classifiers.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::SplitSpec;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (bad flags, unknown scenario or classifier, bad grid)
  3  data error (unreadable or malformed files, empty or invalid splits)
  4  numeric error (non-finite values in features or models)

Outputs default to $CROSSING_OUT_DIR, or the current directory.";

#[derive(Debug, Parser)]
#[command(name = "crossing", version, about = "Street-crossing safety classification from radar tracks", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate scenarios into track/annotation CSVs and a manifest.
    Synth(SynthArgs),
    /// Write the feature matrix of a dataset as CSV.
    Featurize(FeaturizeArgs),
    /// Train a classifier and write a model file.
    Train(TrainArgs),
    /// Predict every interval of a dataset with a trained model.
    Predict(PredictArgs),
    /// Score a trained model on the test part of a split.
    Evaluate(EvaluateArgs),
    /// Cross-validated grid search; writes a ranked table and the best config.
    Cv(CvArgs),
    /// Summarize a dataset manifest.
    DatasetInfo(InfoArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset manifest (TOML with [[entry]] tables).
    #[arg(long)]
    manifest: PathBuf,
    /// Maximum number of object slots.
    #[arg(long)]
    m: Option<usize>,
    /// Number of time bins per interval.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for splits, folds and model randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// `all`, `ratio:TRAIN:TEST` or `sites:A,B:C`.
    #[arg(long)]
    split: Option<SplitSpec>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Library scenario names, scenario TOML files, or `all`.
    scenarios: Vec<String>,
    /// List the scenario library and exit.
    #[arg(long)]
    list: bool,
    /// Generate this many random single-window episodes per site instead.
    #[arg(long)]
    random: Option<usize>,
    /// Comma-separated site ids for --random.
    #[arg(long, value_delimiter = ',', default_value = "synthetic")]
    sites: Vec<String>,
    /// Traffic mix for --random: `constant` or `mixed`.
    #[arg(long, default_value = "mixed")]
    mix: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable sensor noise.
    #[arg(long)]
    noise_free: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output CSV file (default: features.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// forest, svm, knn or baseline.
    #[arg(long)]
    classifier: Option<String>,
    /// Parameter override, e.g. `--set n_trees=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Model file (default: model.txt in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV file (default: predictions.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    model: PathBuf,
    /// Output directory for report.json, report.txt and confusion.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Grid file.
    #[arg(long)]
    grid: PathBuf,
    /// Fold count; overrides the grid file.
    #[arg(long)]
    folds: Option<usize>,
    /// Output directory for cv_table.csv and best_config.toml.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InfoArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Cv(a) => commands::cv(a),
        Command::DatasetInfo(a) => commands::dataset_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
