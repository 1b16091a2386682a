use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pals_core::config::{KernelKind, RunConfig};
use pals_core::offline::SelectionStrategy;
use pals_core::streaming::LambdaPolicy;
use pals_core::PalsError;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "pals", version, about = "Budgeted active learning for eating detection on wearable-sensor data")]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn session CSVs into feature CSVs.
    Features(FeaturesArgs),
    /// Pool-based active learning over feature CSVs.
    TrainOffline(TrainArgs),
    /// Replay a stream through the threshold learner.
    SimulateStream(StreamArgs),
    /// Run a named experiment recipe.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Session CSV files.
    #[arg(required = true)]
    pub sessions: Vec<PathBuf>,
    /// Dataset manifest; defaults to manifest.toml next to each session.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Where to write `<session>.features.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub window_seconds: Option<f64>,
    #[arg(long)]
    pub cutoff_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Knn,
    Rbf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Entropy,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Static,
    Adaptive,
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Replay,
    Interactive,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV of instances to query; its labels answer the queries.
    #[arg(long)]
    pub pool: PathBuf,
    /// Feature CSV of instances labeled from the start.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Labeled feature CSV scored after every iteration.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Total query budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Number of model updates; must divide the budget.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub selection: Option<SelectionArg>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub seed: u64,
    /// Generate lab data, stream and test set from the config.
    #[arg(long, conflicts_with_all = ["lab", "stream"])]
    pub synthetic: bool,
    /// Lab feature CSV; labeled rows seed the model.
    #[arg(long, requires = "stream")]
    pub lab: Option<PathBuf>,
    /// Stream feature CSV, replayed in `segment_start_ms` order.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    /// Held-out labeled feature CSV.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Seed model saved by an earlier run, used instead of `--lab`.
    #[arg(long, conflicts_with = "lab")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Queries per interval.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub interval_ms: Option<f64>,
    #[arg(long)]
    pub static_lambda: Option<f64>,
    /// Look at each interval before replaying it (needed by the best policy).
    #[arg(long)]
    pub two_pass: bool,
    #[arg(long, value_enum, default_value = "replay")]
    pub oracle: OracleArg,
    /// Seconds to wait for an interactive answer.
    #[arg(long)]
    pub oracle_timeout: Option<f64>,
    /// Replay pacing relative to real time.
    #[arg(long)]
    pub speedup: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Recipe name.
    pub recipe: String,
    /// First seed; trials use consecutive seeds.
    #[arg(long)]
    pub seed: u64,
    /// Number of seeds.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Use generated data instead of the datasets.
    #[arg(long)]
    pub synthetic: bool,
    /// Fail when a dataset is missing instead of skipping.
    #[arg(long)]
    pub require_data: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn load_config(cli: &Cli) -> Result<RunConfig, PalsError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if config.data.dir.is_none() {
        config.data.dir = std::env::var_os("PALS_DATA_DIR").map(PathBuf::from);
    }
    Ok(config)
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Knn => KernelKind::Knn,
            KernelArg::Rbf => KernelKind::Rbf,
        }
    }
}

impl From<SelectionArg> for SelectionStrategy {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::Entropy => SelectionStrategy::Entropy,
            SelectionArg::Uniform => SelectionStrategy::Uniform,
        }
    }
}

impl From<PolicyArg> for LambdaPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Static => LambdaPolicy::Static,
            PolicyArg::Adaptive => LambdaPolicy::Adaptive,
            PolicyArg::Best => LambdaPolicy::Best,
        }
    }
}

fn run(cli: Cli) -> Result<(), PalsError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(PalsError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| PalsError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::Features(args) => commands::features(args, &mut config),
        Command::TrainOffline(args) => commands::train_offline(args, &mut config, &cli.out),
        Command::SimulateStream(args) => commands::simulate_stream(args, &mut config, &cli.out),
        Command::Experiment(args) => commands::experiment(args, &mut config, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
