//! Command-line driver for the normap toolkit.
//!
//! Four subcommands share one flat config format (see [`config`]):
//!
//! * `solve` — sweep (method, α, seed) combinations, write one trajectory
//!   CSV per run and a JSON summary with epochs-to-accuracy against a
//!   deterministic reference solution.
//! * `rates` — tabulate the predicted decay exponents on a (γ, θ) grid
//!   and fit empirical log-log slopes on the configured problem.
//! * `descent-check` — run the normal-map method with exact per-iteration
//!   error recording and audit the window descent inequality.
//! * `gen-data` — write a synthetic classification dataset in libsvm
//!   format.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad keys or
//! values, missing files, refused preconditions), 3 for runtime failures
//! (numeric blow-ups, I/O errors mid-run). The split matters in sweep
//! scripts: a 2 means the invocation was wrong and retrying is pointless,
//! a 3 means this particular run went bad.
//!
//! Every output artifact is a deterministic function of (config, seeds):
//! file bytes reproduce exactly across reruns and thread counts. Wall-clock
//! timing goes to stderr only.

pub mod commands;
pub mod config;
pub mod output;
pub mod setup;

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

/// Top-level failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// The invocation or config is wrong; exit code 2.
    Config(String),
    /// The work itself failed; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

/// Maps an I/O failure while writing artifacts to a runtime error.
pub fn io_runtime(context: &str, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "normap",
    version,
    about = "Stochastic composite optimization with normal-map updates"
)]
pub struct Cli {
    /// Path to the flat `key = value` experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides the config's `out` key.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Comma-separated seeds; overrides the config's `seeds` list.
    #[arg(long, global = true, value_delimiter = ',', value_name = "SEEDS")]
    pub seed_list: Option<Vec<u64>>,

    /// Worker threads for independent runs (each run stays single-threaded).
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run solver sweeps; write per-run trajectory CSVs and summary.json.
    Solve,
    /// Tabulate predicted rate exponents and fit empirical slopes.
    Rates,
    /// Audit the merit descent inequality over time windows.
    DescentCheck,
    /// Generate a synthetic classification dataset (libsvm format).
    GenData,
}

/// Parses, dispatches, reports. Returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Dispatches one parsed invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = config::ExperimentConfig::load(&config_path)?;
    if let Some(seeds) = cli.seed_list {
        if seeds.is_empty() {
            return Err(CliError::Config("--seed-list must name at least one seed".into()));
        }
        cfg.seeds = seeds;
    }
    let out_dir = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let threads = cli.threads.max(1);

    match cli.command {
        Command::Solve => {
            commands::solve::cmd_solve(&cfg, &out_dir, threads)?;
        }
        Command::Rates => {
            commands::rates::cmd_rates(&cfg, &out_dir, threads)?;
        }
        Command::DescentCheck => {
            commands::descent_check::cmd_descent_check(&cfg, &out_dir)?;
        }
        Command::GenData => {
            commands::gen_data::cmd_gen_data(&cfg)?;
        }
    }
    Ok(())
}

/// Runs `count` independent jobs on up to `threads` workers and returns
/// the results in job order. Jobs must not depend on each other; output
/// determinism comes from each job owning its artifacts.
pub fn run_indexed<T, F>(count: usize, threads: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if threads <= 1 || count <= 1 {
        return (0..count).map(job).collect();
    }
    let mut slots: Vec<Option<T>> = Vec::with_capacity(count);
    slots.resize_with(count, || None);
    let slots = Mutex::new(slots);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let result = job(i);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every job index was claimed"))
        .collect()
}
