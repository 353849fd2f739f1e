//! `ldctree` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.
//! Reports go to stdout, diagnostics to stderr.

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "ldctree",
    version,
    about = "Deep cascade gradient boosted trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Split a CSV by id, train a model on the train part and report metrics.
    Train(TrainArgs),
    /// Score every row of a CSV; writes `id,score`.
    Predict(PredictArgs),
    /// AUC plus precision/recall/F1 at top-k fractions.
    Evaluate(EvaluateArgs),
    /// Gain importance table and strong/weak feature cut.
    Importance(ImportanceArgs),
    /// Express a cascade leaf through the leaves of the preceding level.
    Explain(ExplainArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// linear or weak_xor
    #[arg(long, default_value = "weak_xor")]
    kind: String,
    #[arg(long = "n", default_value_t = 10_000)]
    n_instances: usize,
    #[arg(long, default_value_t = 2)]
    strong: usize,
    #[arg(long, default_value_t = 3)]
    weak: usize,
    #[arg(long, default_value_t = 10)]
    noise: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_level: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Per-booster hyperparameters; unset flags keep the library defaults.
#[derive(Args, Debug, Clone)]
struct BoostArgs {
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    min_instances: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    row_subsample: Option<f64>,
    #[arg(long)]
    feature_subsample: Option<f64>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Train, validation and test fractions.
    #[arg(
        long,
        default_value = "0.4,0.2,0.4",
        value_delimiter = ',',
        num_args = 1
    )]
    split: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// gbdt, ldctree, eldctree or feldctree
    #[arg(long)]
    model_kind: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    boost: BoostArgs,
    /// Levels per cascade (ldctree, eldctree, feldctree).
    #[arg(long)]
    levels: Option<usize>,
    /// Parallel cascades (eldctree, feldctree).
    #[arg(long)]
    cascades: Option<usize>,
    /// Fraction of the pool drawn for each cascade's first level (eldctree, feldctree).
    #[arg(long)]
    first_level_fraction: Option<f64>,
    /// Fraction of strong features injected per later level (feldctree).
    #[arg(long)]
    scf_inject_fraction: Option<f64>,
    /// Cumulative importance defining the strong features (feldctree).
    #[arg(long)]
    scf_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(
        long,
        default_value = "0.1,0.2,0.5",
        value_delimiter = ',',
        num_args = 1
    )]
    topk: Vec<f64>,
    /// Evaluate only one id-split part: train, validation or test.
    #[arg(long)]
    part: Option<String>,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args, Debug)]
struct ImportanceArgs {
    /// Train an importance booster on the train part of this CSV.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    data: Option<PathBuf>,
    /// Read importances from a gbdt or feldctree model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    boost: BoostArgs,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// 1-based level; must be at least 2.
    #[arg(long)]
    level: usize,
    /// 1-based tree within the level.
    #[arg(long)]
    tree: usize,
    /// 1-based leaf within the tree.
    #[arg(long)]
    leaf: usize,
    /// 1-based cascade, required for ensemble models.
    #[arg(long)]
    cascade: Option<usize>,
    /// Check the expression against the instances of this CSV.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Failure::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Importance(a) => commands::importance(a),
        Command::Explain(a) => commands::explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
