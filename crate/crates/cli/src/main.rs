//! `nbsel`: feature selection for two-class Naive Bayes from expert
//! probability tables.
//!
//! Exit status: 0 success, 2 usage, 3 invalid input or configuration,
//! 4 capacity or budget exceeded.

mod commands;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nbsel_core::engine::DEFAULT_MAX_DEPTH;
use nbsel_core::{ClassPriors, EngineConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "nbsel", version, about = "Exact-error feature selection for two-class Naive Bayes on probability tables")]
struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select features and report the cumulative error trace.
    Select(SelectArgs),
    /// Rank features individually.
    Rank(RankArgs),
    /// Rerun selection on perturbed tables and compare the resulting rankings.
    Sensitivity(SensitivityArgs),
    /// Emit (c, d) points and the no-improvement region of a selection.
    Region(RegionArgs),
    /// Best subset of a given size by exhaustive enumeration.
    Oracle(OracleArgs),
    /// Search small grid tables for selection pathologies.
    Pathology(PathologyArgs),
}

#[derive(Args, Debug, Clone)]
struct TableArgs {
    /// Probability table (CSV with header).
    #[arg(long)]
    input: PathBuf,

    /// Treat the input as multi-class and collapse it onto this class.
    #[arg(long)]
    multiclass_target: Option<String>,

    /// Class priors of the positive and negative class.
    #[arg(long, default_value = "0.5,0.5", value_parser = parse_priors)]
    priors: ClassPriors,

    /// Clamp every probability to [eps, 1 - eps] after loading.
    #[arg(long)]
    clamp_epsilon: Option<f64>,

    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct EngineArgs {
    /// Largest number of features folded into the joint distribution.
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: u32,

    /// Drop cells whose mass a + b falls below this value (0 disables).
    #[arg(long, default_value_t = 0.0)]
    prune_threshold: f64,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig::default()
            .with_max_depth(self.max_depth)
            .with_prune_threshold(self.prune_threshold)
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Tabular)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Tabular,
    Structured,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Number of features to select.
    #[arg(long)]
    d: Option<usize>,

    /// Stop once the error is at or below this value.
    #[arg(long)]
    target_error: Option<f64>,

    /// Warn when a step reduces the error by less than this (never stops selection).
    #[arg(long)]
    min_reduction: Option<f64>,

    /// Selection strategy: sfs, exhaustive, individual-error, individual-absdiff.
    #[arg(long, default_value = "sfs")]
    strategy: String,

    /// Record the generation time in the report.
    #[arg(long)]
    timestamps: bool,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Ranking criterion: error or absdiff.
    #[arg(long, default_value = "error")]
    criterion: String,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SensitivityArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Standard deviation of the perturbation; repeat to compare several.
    #[arg(long, num_args = 1.., default_values_t = [0.1])]
    sigma: Vec<f64>,

    /// Perturbed runs per sigma.
    #[arg(long, default_value_t = 1000)]
    runs: u64,

    /// Features selected per run.
    #[arg(long, default_value_t = 10)]
    d: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Length of the compared top lists (default: d).
    #[arg(long)]
    top: Option<usize>,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Run forward selection for this many steps and use its selection.
    #[arg(long, conflicts_with = "features")]
    d: Option<usize>,

    /// Use these features, comma-separated, as the selection.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,

    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Subset size.
    #[arg(long)]
    d: usize,

    /// Largest number of subsets to evaluate.
    #[arg(long, default_value_t = nbsel_core::selector::ExhaustiveBudget::default().max_subsets)]
    max_subsets: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PathologyArgs {
    /// best_not_in_best_pair, individually_best_pair_not_best_pair or nonmonotone_reduction.
    #[arg(long)]
    kind: String,

    /// Random grid tables to try.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Spacing of the probability grid.
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,

    #[arg(long, default_value = "0.5,0.5", value_parser = parse_priors)]
    priors: ClassPriors,

    /// Check the tables in this two-class file first (uses --priors).
    #[arg(long)]
    seed_table: Vec<PathBuf>,

    #[command(flatten)]
    output: OutputArgs,
}

fn parse_priors(s: &str) -> Result<ClassPriors, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [p, n] = parts.as_slice() else {
        return Err("expected two comma-separated values, e.g. 0.3,0.7".into());
    };
    let p: f64 = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    let n: f64 = n.parse().map_err(|_| format!("`{n}` is not a number"))?;
    ClassPriors::new(p, n).map_err(|e| e.to_string())
}

/// Colour only for a terminal and only when `NO_COLOR` is unset or empty.
fn use_color(out: &Option<PathBuf>) -> bool {
    out.is_none() && std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<nbsel_core::Error>() {
        Some(e) if e.is_capacity() => EXIT_CAPACITY,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
