//! `riskdp`: solve, learn and sweep risk-sensitive tabular MDPs from a JSON config.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskdp::harness::{csv_bytes, load_config, run_experiment, write_csv, Algorithm, GridM};
use riskdp::Error;

#[derive(Parser)]
#[command(name = "riskdp", version, about = "Risk-sensitive planning and learning under general utilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact optimal value table of the discretized environment.
    Solve(Common),
    /// Simulator-based value iteration; one row per seed.
    Vigu(Common),
    /// Episodic learning with Hoeffding bonuses; one row per episode per seed.
    Ucb(Common),
    /// Cross the config's sweep values with its seeds.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; overrides the config. Without either, CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid resolution m, or "auto" for learning runs.
    #[arg(long = "grid-m")]
    grid_m: Option<GridM>,
    /// Samples per (step, state, action) for vigu.
    #[arg(long)]
    n: Option<usize>,
    /// Episodes for ucb.
    #[arg(long)]
    episodes: Option<usize>,
    /// Failure probability.
    #[arg(long)]
    p: Option<f64>,
    /// Fill the wall_ms column (makes output non-reproducible).
    #[arg(long)]
    timings: bool,
}

fn run(algorithm: Algorithm, args: Common) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    cfg.algorithm = Some(algorithm);
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(m) = args.grid_m {
        cfg.grid_m = m;
    }
    if let Some(n) = args.n {
        cfg.n = Some(n);
    }
    if let Some(k) = args.episodes {
        cfg.episodes = Some(k);
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    cfg.timings |= args.timings;
    cfg.validate()?;

    let result = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => write_csv(result.schema, &result.rows, path),
        None => {
            let bytes = csv_bytes(result.schema, &result.rows)?;
            std::io::stdout().write_all(&bytes).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (algorithm, args) = match cli.command {
        Command::Solve(a) => (Algorithm::Solve, a),
        Command::Vigu(a) => (Algorithm::Vigu, a),
        Command::Ucb(a) => (Algorithm::Ucb, a),
        Command::Sweep(a) => (Algorithm::Sweep, a),
    };
    let config = args.config.display().to_string();
    match run(algorithm, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskdp {} ({config}): {e}", algorithm.name());
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
