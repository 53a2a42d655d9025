//! `tshape` — generate data, train, score, evaluate, and export attention.
//!
//! Every command is deterministic given its flags and seed, and writes a
//! `.manifest` next to its primary output recording the effective
//! configuration and artifact checksums. Exit codes: 0 on success, 1 for
//! runtime or numeric failures, 2 for usage and I/O errors.

mod commands;
mod config;
mod manifest;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "tshape", version, about = "Patch-attention time-series anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic double-peak series with injected anomalies.
    Synth(SynthArgs),
    /// Train a detector on the training region of a series.
    Train(TrainArgs),
    /// Score the test region of a series with a trained checkpoint.
    Score(ScoreArgs),
    /// Evaluate a score series against labels.
    Eval(EvalArgs),
    /// Export attention matrices and gate values for one window.
    #[command(name = "export-attn")]
    ExportAttn(ExportAttnArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of periods to generate.
    #[arg(long)]
    periods: Option<usize>,
    /// Samples per period.
    #[arg(long)]
    period_len: Option<usize>,
    /// Amplitude of the first peak.
    #[arg(long)]
    peak1: Option<f64>,
    /// Amplitude of the second, smaller peak.
    #[arg(long)]
    peak2: Option<f64>,
    /// Gaussian noise sigma.
    #[arg(long)]
    noise: Option<f64>,
    /// Number of anomalies to inject after the split point.
    #[arg(long)]
    anomalies: Option<usize>,
    /// Comma-separated anomaly kinds (shape_convexity, amp_ratio, spike, level_shift).
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Key-value config document overriding defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ModelFlags {
    /// Window length T.
    #[arg(long)]
    window: Option<usize>,
    /// Patch length s (must divide the window length).
    #[arg(long)]
    patch: Option<usize>,
    /// Comma-separated odd convolution kernel sizes.
    #[arg(long)]
    kernels: Option<String>,
    /// Channels per convolution scale.
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    heads_local: Option<usize>,
    #[arg(long)]
    heads_global: Option<usize>,
    /// Model variant: full, no_local, no_global, no_conv, sliding_window.
    #[arg(long)]
    ablation: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input series CSV.
    input: PathBuf,
    /// Output checkpoint path.
    #[arg(short, long)]
    output: PathBuf,
    /// Loss history CSV path (default: `<output>.history.csv`).
    #[arg(long)]
    loss_history: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Stride between training windows (default: patch length).
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the series' train/test split point.
    #[arg(long)]
    split_index: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Input series CSV.
    input: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output score CSV path.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    split_index: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Score CSV produced by `score` (or a baseline run).
    #[arg(long)]
    scores: PathBuf,
    /// Series CSV carrying the ground-truth labels.
    #[arg(long)]
    series: PathBuf,
    /// Report output path (default: `<scores>.report.txt`).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also evaluate a baseline detector on the same series: ar | subseq.
    #[arg(long)]
    baseline: Option<String>,
    /// Autoregressive order for `--baseline ar`.
    #[arg(long)]
    ar_order: Option<usize>,
    /// Subsequence length for `--baseline subseq`.
    #[arg(long)]
    subseq_len: Option<usize>,
    #[arg(long)]
    split_index: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExportAttnArgs {
    /// Input series CSV.
    input: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Time index of the window end (must lie in the test region).
    #[arg(long)]
    index: usize,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Also render SVG heatmaps.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    split_index: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Errors that indicate misuse or unreadable/unwritable inputs, as opposed
/// to runtime numeric failures.
fn is_usage_error(err: &anyhow::Error) -> bool {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() || cause.is::<config::ConfigFileError>() {
            return true;
        }
        if let Some(data_err) = cause.downcast_ref::<tshape::data::DataError>() {
            return !matches!(data_err, tshape::data::DataError::Generation(_));
        }
        if let Some(ckpt) = cause.downcast_ref::<tshape::training::CheckpointError>() {
            let _ = ckpt;
            return true;
        }
        if cause.is::<commands::UsageError>() {
            return true;
        }
    }
    false
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("TSHAPE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Train(args) => commands::train(args),
        Command::Score(args) => commands::score(args),
        Command::Eval(args) => commands::eval(args),
        Command::ExportAttn(args) => commands::export_attn(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
