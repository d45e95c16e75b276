//! `sparseswaps` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 resource limit,
//! 1 internal error.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparseswaps::{Criterion, SparsityConstraint};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, message: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self { code: 1, message: msg.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        let code = if e.kind() == std::io::ErrorKind::NotFound { 2 } else { 1 };
        Self { code, message: format!("{}: {e}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<sparseswaps::Error> for CliError {
    fn from(e: sparseswaps::Error) -> Self {
        use sparseswaps::Error as E;
        let code = match &e {
            E::TooLarge { .. } => 3,
            E::Io(io) if io.kind() != std::io::ErrorKind::NotFound => 1,
            E::DecompositionFailure => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparseswaps", version, about = "Exact 1-swap refinement of pruning masks")]
struct Cli {
    /// Worker threads for parallel phases (0 = all cores).
    #[arg(long, global = true, env = "SPARSESWAPS_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Accumulate G = XXᵀ over one or more activation blocks.
    Gram(GramArgs),
    /// Build an initial mask from an importance criterion.
    Warmstart(WarmstartArgs),
    /// Refine a mask with greedy 1-swaps.
    Refine(RefineArgs),
    /// Print the per-row and total loss of a mask.
    Eval(EvalArgs),
    /// Exhaustive optimum per row; optionally certify a mask.
    Oracle(OracleArgs),
    /// Criterion × t_max sweep over synthetic layers.
    Bench(BenchArgs),
    /// Write a synthetic weight/activation pair.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with default values for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[command(flatten)]
    common: Common,
    /// Activation blocks (d_in × b each).
    #[arg(long, num_args = 1..)]
    activations: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WarmstartArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long)]
    criterion: Option<Criterion>,
    /// `perrow:<p>` or `nm:<N>:<M>`.
    #[arg(long)]
    constraint: Option<SparsityConstraint>,
    /// Per-row sparsity fraction, used when no constraint is given.
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    ria_exponent: Option<f64>,
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long)]
    mask_in: Option<PathBuf>,
    #[arg(long)]
    constraint: Option<SparsityConstraint>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// JSON report; a CSV with the same stem is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long, alias = "mask")]
    mask_in: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long)]
    constraint: Option<SparsityConstraint>,
    #[arg(long)]
    sparsity: Option<f64>,
    /// Mask to certify against the optimum.
    #[arg(long, alias = "mask")]
    mask_in: Option<PathBuf>,
    /// Tolerance of the 1-swap optimality check.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthFlags {
    #[arg(long)]
    d_in: Option<usize>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    n_cols: Option<usize>,
    #[arg(long)]
    corr_rank: Option<usize>,
    #[arg(long)]
    outlier_count: Option<usize>,
    #[arg(long)]
    outlier_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<Criterion>>,
    /// Comma-separated iteration budgets.
    #[arg(long, value_delimiter = ',')]
    t_max: Option<Vec<usize>>,
    #[arg(long)]
    constraint: Option<SparsityConstraint>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    ria_exponent: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Gram(a) => commands::gram(a),
        Command::Warmstart(a) => commands::warmstart(a),
        Command::Refine(a) => commands::refine(a),
        Command::Eval(a) => commands::eval(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Bench(a) => commands::bench(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
