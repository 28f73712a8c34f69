//! Command-line experiment runner for the `dunkl` crate.
//!
//! One JSON config describes one experiment; each subcommand runs one family
//! and writes a provenance-stamped CSV (header row, `#` comment lines with
//! the config hash, then data).  Exit codes: 0 success, 1 validation error,
//! 2 numeric or convergence error, 3 flag inconsistency in `verify-theorem`.

mod config;
mod runs;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use config::RunKind;
use table::Provenance;

#[derive(Parser)]
#[command(name = "dunkl-cli", version, about = "Rational Dunkl heat-kernel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection-walk sums over random point pairs.
    Lambda(RunArgs),
    /// Exact product kernels against the two-sided envelope.
    Heat(RunArgs),
    /// Splitting-product kernels with potential, against the free kernel.
    Schrodinger(RunArgs),
    /// The three Green operators along a probe line.
    Green(RunArgs),
    /// Monte Carlo path estimates against the splitting kernel.
    Fk(RunArgs),
    /// The boundedness equivalence harness; exit 3 when the flags disagree.
    VerifyTheorem(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (JSON, one file per experiment).
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config, stdout when absent from both.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config thread count.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppresses the timestamp comment so outputs compare byte-for-byte.
    #[arg(long)]
    no_timestamp: bool,
}

impl Command {
    fn split(&self) -> (RunKind, &RunArgs) {
        match self {
            Command::Lambda(a) => (RunKind::Lambda, a),
            Command::Heat(a) => (RunKind::Heat, a),
            Command::Schrodinger(a) => (RunKind::Schrodinger, a),
            Command::Green(a) => (RunKind::Green, a),
            Command::Fk(a) => (RunKind::Fk, a),
            Command::VerifyTheorem(a) => (RunKind::VerifyTheorem, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();

    let mut config = match config::load(&args.config, kind) {
        Ok(c) => c,
        Err(violations) => {
            for v in &violations {
                eprintln!("error: {v}");
            }
            return ExitCode::from(1);
        }
    };
    // Command-line overrides land in the config before hashing, so the
    // recorded provenance describes the run that actually happened.
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.threads = Some(threads);
    }
    if let Some(out) = &args.out {
        config.output = Some(out.display().to_string());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };

    let output = match pool.install(|| runs::run_experiment(&config, kind)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(classify(&e));
        }
    };

    let effective_json = match serde_json::to_string(&config) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: serializing effective config: {e}");
            return ExitCode::from(2);
        }
    };
    let timestamp = if args.no_timestamp {
        None
    } else {
        Some(
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    };
    let csv = output.table.to_csv(&Provenance::new(&effective_json, timestamp));

    if let Some(path) = &config.output {
        if let Err(e) = std::fs::write(path, &csv) {
            eprintln!("error: {path}: {e}");
            return ExitCode::from(1);
        }
    } else {
        print!("{csv}");
    }

    if output.theorem_consistent == Some(false) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

/// Maps library failures onto the exit-code contract: bad inputs are
/// validation errors (1), everything numeric is 2.
fn classify(err: &dunkl::Error) -> u8 {
    use dunkl::Error::*;
    match err {
        InvalidArgument(_) | DimensionMismatch(_) | InvalidRootSystem(_) => 1,
        _ => 2,
    }
}
