mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] braincast::Error),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric divergence, 4 I/O.
    fn exit_code(&self) -> u8 {
        use braincast::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Diverged(_) => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::InvalidArgument(_) => 1,
                E::Shape { .. } | E::NonFinite { .. } | E::Parse { .. } | E::Data(_) | E::Json(_) => 2,
                E::NonFiniteGradient(_) => 3,
                E::Io { .. } | E::Checkpoint(_) => 4,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "braincast", version, about = "Multivariate time-series forecasting with spatial and temporal attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (one CSV per subject) and its manifest.
    Generate(GenerateArgs),
    /// Train a model and write config, log, metrics and checkpoints.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// Forecast the next T points after the end of a series CSV.
    Forecast(ForecastArgs),
    /// Train and evaluate once per look-back length.
    Sweep(SweepArgs),
    /// Train and evaluate the full model and each single-module ablation.
    Ablate(RunArgs),
    /// Write averaged attention maps for a checkpoint as CSV.
    ExportAttn(ExportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 12)]
    subjects: usize,
    #[arg(long, default_value_t = 16)]
    variates: usize,
    #[arg(long, default_value_t = 800)]
    length: usize,
    #[arg(long, default_value_t = 4)]
    latents: usize,
    #[arg(long, default_value_t = 0.8)]
    noise_ar: f64,
    #[arg(long, default_value_t = 0.3)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the subject split; defaults to `--seed`. Vary it alone to
    /// repeat an experiment over different splits of the same series.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Window written into the manifest.
    #[arg(long, default_value_t = 140)]
    lookback: usize,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = 20)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON file with `model`, `data` and `train` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shorthand for `--data.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    /// Overrides such as `--model.D 64` or `--train.lr=1e-3`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--SECTION.KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Continue from `<out>/state.bin`, appending to the existing log.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated look-back lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 120, 140, 160, 180])]
    lookbacks: Vec<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the manifest recorded in the checkpoint.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Also write `metrics_<split>.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series CSV (`t,v0,v1,…`); the last L points are used.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Average over at most this many windows (all when omitted).
    #[arg(long)]
    max_windows: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::ExportAttn(a) => commands::export_attn(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `braincast --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
