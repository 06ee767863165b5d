//! The `coverage` command line: synthesize tracking data, extract features,
//! fit and evaluate mixture models, and build coverage reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use coverage_core::eval::EvalError;
use coverage_core::features::TableError;
use coverage_core::gmm::GmmError;
use coverage_core::ingest::IngestError;
use coverage_core::report::ReportError;
use coverage_core::synth::SynthError;

pub const SEED_ENV: &str = "COVERAGE_SEED";
pub const THREADS_ENV: &str = "COVERAGE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<GmmError> for CliError {
    fn from(e: GmmError) -> Self {
        match e {
            GmmError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            GmmError::TooFewObservations { .. } | GmmError::Collapsed { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gmm(g) => g.into(),
            EvalError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            EvalError::NoDefinedFolds(_) | EvalError::AriUndefined => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::UnknownGrouping(_) => CliError::Usage(e.to_string()),
            ReportError::Gmm(g) => g.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "coverage", version, about = "Man/zone coverage clustering from player tracking data")]
pub struct Cli {
    /// Seed for every random choice; falls back to $COVERAGE_SEED, then the built-in default.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labelled synthetic tracking data.
    Synth(SynthArgs),
    /// Parse tracking CSV and write the cornerback feature table.
    Extract(ExtractArgs),
    /// Fit a mixture model to a feature table.
    Fit(FitArgs),
    /// Fit one two-component model per play window.
    FitWindows(FitWindowsArgs),
    /// Score a feature table with a fitted model.
    Predict(PredictArgs),
    /// Choose the number of components by leave-one-week-out ARI.
    SelectG(SelectGArgs),
    /// Rank features by their leave-one-week-out influence.
    Influence(InfluenceArgs),
    /// Per-window man/zone probabilities for selected cornerbacks.
    Timeline(TimelineArgs),
    /// Man/zone proportions grouped by team, player, quarter or down.
    Report(ReportArgs),
    /// Histograms of zone membership probabilities per window.
    Hist(HistArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Simulation settings (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tracking CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth labels; defaults to `<output>.truth.csv`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Ingest configuration with the game-to-week map; defaults to `<output>.ingest.toml`.
    #[arg(long)]
    pub ingest_config: Option<PathBuf>,
    #[arg(long)]
    pub n_plays: Option<usize>,
    #[arg(long)]
    pub man_fraction: Option<f64>,
    #[arg(long)]
    pub hybrid_fraction: Option<f64>,
    #[arg(long)]
    pub disguise_fraction: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub weeks: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Tracking CSV files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Ingest configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Feature CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Play metadata sidecar; defaults to `<output>.meta.csv`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Data-quality report; defaults to `<output>.quality.txt`.
    #[arg(long)]
    pub quality: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct FitFlags {
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative log-likelihood change that ends EM.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Added to each covariance diagonal.
    #[arg(long)]
    pub reg_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub g: usize,
    /// Restrict to the columns of one window.
    #[arg(long)]
    pub window: Option<String>,
    /// Comma-separated component names overriding the MAN/ZONE heuristic.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct FitWindowsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one `<WINDOW>.json` model per window.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Play metadata; defaults to `<input>.meta.csv` when present.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectGArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub g_min: usize,
    #[arg(long, default_value_t = 9)]
    pub g_max: usize,
    /// Directory for `cv_summary.csv`, `cv_folds.csv` and `cv_series.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub g: usize,
    /// Remove one column at a time, or one feature family across all windows.
    #[arg(long, default_value = "column")]
    pub ablation_mode: String,
    /// Rows in the top view.
    #[arg(long, default_value_t = 9)]
    pub top: usize,
    /// Directory for `influence_top.csv`, `influence_full.csv` and `influence_series.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    /// Tracking CSV files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of per-window models written by `fit-windows`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub game: Option<String>,
    #[arg(long)]
    pub play: Option<String>,
    #[arg(long)]
    pub player: Option<String>,
    /// Recompute features frame by frame over the growing phase window.
    #[arg(long)]
    pub sliding: bool,
    /// Directory for `timeline.csv` and `timeline_series.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Predictions CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// team, player, quarter or down.
    #[arg(long)]
    pub group_by: String,
    #[arg(long, default_value_t = 50)]
    pub min_count: usize,
    /// Keep only the first rows after sorting.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Predictions CSV files; rows are grouped by their window column.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (program name first) and runs the command. Help and
/// version requests print and succeed.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    configure_threads()?;
    commands::dispatch(cli)
}

/// Applies $COVERAGE_THREADS to the global thread pool once per process.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer")));
    }
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialised; {THREADS_ENV} ignored");
    }
    Ok(())
}
