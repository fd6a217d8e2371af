//! Command-line front end.
//!
//! Every command is a pure function of its input files, flags and seed.
//! Exit status is 0 on success, 1 on runtime or model failure and 2 on
//! usage errors.

mod commands;
mod text;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use commands::{eval_report, EvalReport, KernelErrors};

#[derive(Debug, Parser)]
#[command(name = "hawkesnet", version, about = "Network reconstruction from spatiotemporal events with Hawkes processes")]
pub struct Cli {
    /// Cap on worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a stable triggering matrix from a weighted block model.
    Synth(SynthArgs),
    /// Simulate an event catalog from a triggering matrix.
    Simulate(SimulateArgs),
    /// Fit a Hawkes model to an event catalog.
    Fit(FitArgs),
    /// Score an inferred network against ground truth.
    Eval(EvalArgs),
    /// Stochastic declustering of a fitted catalog.
    Decluster(DeclusterArgs),
    /// Three-node motif z-scores of an event network.
    Motifs(MotifsArgs),
    /// Turn check-in data into an event catalog.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Community sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,10,5,5")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.68)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.2)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mean_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub mean_out: f64,
    /// Read the two weight parameters as exponential rates instead of means.
    #[arg(long)]
    pub rates: bool,
    #[arg(long, default_value_t = 100_000)]
    pub max_attempts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Matrix CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Background rate, one value for every node or one per node.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.6)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.3)]
    pub sigma2: f64,
    /// Time horizon.
    #[arg(long = "T", default_value_t = 250.0)]
    pub horizon: f64,
    /// Spatial region as `x0,x1,y0,y1`.
    #[arg(long, value_delimiter = ',', default_value = "0,1,0,1")]
    pub region: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Catalog CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Parametric,
    Nonparametric,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalization {
    FullMass,
    Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Default,
    Random,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Convergence tolerance.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value = "default")]
    pub init: Init,
    /// Seed of a random initialisation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop pairs with `ω⁰Δt` above this (parametric and temporal).
    #[arg(long)]
    pub decay_cutoff: Option<f64>,
    /// Keep every earlier event as a candidate parent.
    #[arg(long, conflicts_with = "decay_cutoff")]
    pub no_cutoff: bool,
    /// Fit the background variance separately (parametric).
    #[arg(long)]
    pub untied_variances: bool,
    #[arg(long)]
    pub t_bins: Option<usize>,
    #[arg(long)]
    pub r_bins: Option<usize>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Neighbour rank of the adaptive bandwidths.
    #[arg(long)]
    pub n_p: Option<usize>,
    /// Minimum bandwidth.
    #[arg(long)]
    pub eps_r: Option<f64>,
    #[arg(long, value_enum, default_value = "full-mass")]
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    R1,
    NodeReciprocity,
    Correlation,
    Roc,
    Nmi,
    KernelL1,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Inferred matrix CSV, or a `fit` output directory.
    #[arg(long)]
    pub inferred: PathBuf,
    /// True matrix CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True communities, `node,community`.
    #[arg(long)]
    pub truth_labels: Option<PathBuf>,
    /// Inferred communities, `node,community`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Comma-separated metrics; default: everything the inputs allow.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    /// Zero inferred entries below this before computing reciprocity.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// True temporal decay, for kernel errors.
    #[arg(long)]
    pub omega: Option<f64>,
    /// True spatial variance, for kernel errors.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// JSON report; the ROC curve goes to `<out>.roc.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeclusterArgs {
    /// Responsibility CSV from `fit`.
    #[arg(long)]
    pub responsibilities: PathBuf,
    /// Simulated catalog whose parent column gives the true labels.
    #[arg(long, conflicts_with = "truth_labels")]
    pub events: Option<PathBuf>,
    /// True labels, `event_index,label`.
    #[arg(long)]
    pub truth_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Labels of the first run, `event_index,label`.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MotifsArgs {
    /// Responsibility CSV; edges are pairs with `p_ij ≥ threshold`.
    #[arg(long, required_unless_present = "edges", conflicts_with = "edges")]
    pub responsibilities: Option<PathBuf>,
    /// Directed edge list `src,dst[,weight]`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Vertex count of an edge list (default: one past the largest index).
    #[arg(long, requires = "edges")]
    pub n_nodes: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, default_value_t = 100)]
    pub n_null: usize,
    #[arg(long, default_value_t = 150)]
    pub swap_factor: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the event network as an edge list.
    #[arg(long)]
    pub network_out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum City {
    Nyc,
    La,
    Sf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Check-ins: `user,timestamp,lat,lon` CSV or tab-separated Gowalla dump.
    #[arg(long)]
    pub checkins: PathBuf,
    /// Friendships: `user_a,user_b` CSV or tab-separated edge list.
    #[arg(long)]
    pub friends: Option<PathBuf>,
    /// Bounding box, window, activity bounds and restriction of a city.
    #[arg(long, value_enum)]
    pub preset: Option<City>,
    /// Bounding box as `north,south,east,west`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bbox: Option<Vec<f64>>,
    /// Window start, `YYYY-MM-DD`, RFC 3339 or epoch seconds (inclusive).
    #[arg(long)]
    pub start: Option<String>,
    /// Window end (exclusive).
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long)]
    pub min_checkins: Option<usize>,
    #[arg(long)]
    pub max_checkins: Option<usize>,
    /// Keep the largest connected component of the friendship graph.
    #[arg(long)]
    pub lcc: bool,
    /// Keep the 1-ego network of this user.
    #[arg(long, conflicts_with = "lcc")]
    pub ego: Option<String>,
    /// Catalog CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

pub fn run(cli: Cli, argv: Vec<String>) -> crate::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Data(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a, argv),
        Command::Simulate(a) => commands::simulate(&a, argv),
        Command::Fit(a) => commands::fit(&a, argv),
        Command::Eval(a) => commands::eval(&a, argv),
        Command::Decluster(a) => commands::decluster(&a, argv),
        Command::Motifs(a) => commands::motifs(&a, argv),
        Command::Ingest(a) => commands::ingest(&a, argv),
    }
}
