//! `hawkes`: simulate, fit, select, smooth, diagnose and replicate from the shell.
//!
//! Every command writes its artifacts plus `manifest.json` into `--out`.
//! Exit codes: 0 success, 1 usage, 2 domain failure, 3 I/O or parse error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_core::cls::DesignStorage;
use hawkes_core::HawkesError;
use serde::Serialize;

/// Default worker thread count when `--threads` is absent.
pub const THREADS_ENV: &str = "HAWKES_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "hawkes",
    version,
    about = "Nonparametric Hawkes estimation from event streams"
)]
struct Cli {
    /// Worker threads; falls back to $HAWKES_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a Hawkes process from a JSON spec.
    Simulate(SimulateArgs),
    /// Bin events and fit the excitation grid and baselines.
    Fit(FitArgs),
    /// AIC scan over candidate supports.
    SelectSupport(SelectSupportArgs),
    /// Baseline estimates across candidate bin sizes.
    SelectBinsize(SelectBinsizeArgs),
    /// Box-smooth the excitation grid of a saved fit.
    Smooth(SmoothArgs),
    /// Time-change residual diagnostics for a fitted or given model.
    Diagnose(DiagnoseArgs),
    /// Monte-Carlo replication of simulate-and-fit.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct EventInput {
    /// Events CSV with `component,timestamp` rows (1-based components).
    #[arg(long)]
    pub events: PathBuf,
    /// Start of the observation window (default 0).
    #[arg(long)]
    pub window_start: Option<f64>,
    /// End of the observation window (default: last timestamp).
    #[arg(long)]
    pub window_end: Option<f64>,
    /// Number of components (default: largest index in the file).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// HawkesSpec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Simulation horizon `T`; events are returned on `(0, T]`.
    #[arg(long = "T", visible_alias = "horizon")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Discarded prefix before time 0 (default: 10x the largest support).
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageArg {
    Auto,
    Dense,
    Sparse,
}

impl From<StorageArg> for DesignStorage {
    fn from(s: StorageArg) -> Self {
        match s {
            StorageArg::Auto => DesignStorage::Auto,
            StorageArg::Dense => DesignStorage::Dense,
            StorageArg::Sparse => DesignStorage::Sparse,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("support_choice").required(true).args(["support", "s_max"])))]
pub struct FitArgs {
    #[command(flatten)]
    pub input: EventInput,
    /// Bin width Δ.
    #[arg(long)]
    pub delta: f64,
    /// Support s; the fit uses p = ceil(s/Δ) lags.
    #[arg(long)]
    pub support: Option<f64>,
    /// Choose the support by an AIC scan up to this value instead of `--support`.
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Preliminary bin size of the AIC scan (default: about one event per bin).
    #[arg(long, requires = "s_max")]
    pub delta0: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = StorageArg::Auto)]
    pub storage: StorageArg,
    /// Also write box-smoothed excitation curves.
    #[arg(long, requires = "tau")]
    pub emit_smoothed: bool,
    /// Smoothing window width.
    #[arg(long, requires = "emit_smoothed")]
    pub tau: Option<f64>,
    /// Evaluation grid step for smoothed curves (default Δ/4).
    #[arg(long, requires = "emit_smoothed")]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SelectSupportArgs {
    #[command(flatten)]
    pub input: EventInput,
    /// Preliminary bin size (default: about one event per bin).
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Largest candidate support.
    #[arg(long)]
    pub s_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SelectBinsizeArgs {
    #[command(flatten)]
    pub input: EventInput,
    #[arg(long)]
    pub support: f64,
    /// Strictly decreasing candidate bin sizes, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SmoothArgs {
    /// Fit JSON written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub tau: f64,
    /// Evaluation grid step (default Δ/4).
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["fit", "spec"])))]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: EventInput,
    /// Fit JSON; the excitation grid is used as step functions unless `--tau` is given.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Ground-truth HawkesSpec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Box-smooth the fitted excitation with this window first.
    #[arg(long, requires = "fit")]
    pub tau: Option<f64>,
    /// History discarded before residuals are collected (default: model support).
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long, default_value_t = hawkes_core::diagnostics::DEFAULT_LAGS)]
    pub lags: usize,
    /// KS tests on consecutive chunks of this many residuals.
    #[arg(long)]
    pub chunk: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplicateArgs {
    /// ReplicationConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Override the seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(e: &HawkesError) -> u8 {
    match e {
        HawkesError::InvalidParameter(_) => 1,
        HawkesError::Parse(_) | HawkesError::Io(_) => 3,
        _ => 2,
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, HawkesError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            HawkesError::InvalidParameter(format!(
                "{THREADS_ENV} must be a thread count, got {v:?}"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), HawkesError> {
    if let Some(n) = resolve_threads(cli.threads)? {
        if n == 0 {
            return Err(HawkesError::InvalidParameter(
                "thread count must be positive".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HawkesError::InvalidParameter(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::SelectSupport(a) => commands::select_support(&a),
        Command::SelectBinsize(a) => commands::select_binsize(&a),
        Command::Smooth(a) => commands::smooth(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Replicate(a) => commands::replicate(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
