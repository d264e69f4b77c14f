use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use overuse_sim::chart::{render_chart, ChartKind};
use overuse_sim::config::load_config;
use overuse_sim::environments::{apply_misrepresentation, build, ArmTable, EnvironmentLevel};
use overuse_sim::harness::{
    run_batch_traced, run_batch_with_threads, run_sweep_with_threads, threads_from_env, Scenario,
};
use overuse_sim::output::{write_batch, write_sweep, write_traces};
use overuse_sim::{Result, SimError};

/// Simulate dual-system users interacting with a bandit recommender.
///
/// Worker threads are capped by the SIM_THREADS environment variable
/// (0 or unset = one per core).
#[derive(Parser)]
#[command(name = "overuse-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one batch and write its CSVs and resolved config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write every replication's step-by-step trace.
        #[arg(long)]
        replication_traces: bool,
    },
    /// Run every combination of the config's `sweep` values.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Dump a built-in environment as JSON.
    Env {
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long)]
        misrepresent: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check a config file without running anything.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Draw an SVG chart from a CSV written by `run` or `sweep`.
    Plot {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Simplified,
    Advanced,
    Refined,
}

impl From<LevelArg> for EnvironmentLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Simplified => EnvironmentLevel::Simplified,
            LevelArg::Advanced => EnvironmentLevel::Advanced,
            LevelArg::Refined => EnvironmentLevel::RefinedRecommender,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    AgentsEvolution,
    RecommenderQ,
}

impl From<KindArg> for ChartKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::AgentsEvolution => ChartKind::AgentsEvolution,
            KindArg::RecommenderQ => ChartKind::RecommenderQ,
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let threads = threads_from_env();
    match command {
        Command::Run { config, out, replication_traces } => {
            let cfg = load_config(&config)?;
            if !cfg.sweep.is_empty() {
                return Err(SimError::config("sweep", "config declares a sweep; use the `sweep` command"));
            }
            let result = if replication_traces {
                let (result, traces) = run_batch_traced(&cfg, threads)?;
                write_traces(&traces, &out)?;
                result
            } else {
                run_batch_with_threads(&cfg, threads)?
            };
            for path in write_batch(&result, &out)? {
                println!("{}", path.display());
            }
            eprintln!(
                "final: {} of {} non-addicted",
                result.final_non_addicted(),
                result.n_replications
            );
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config)?;
            let runs = run_sweep_with_threads(&cfg, threads)?;
            for (run, dir) in runs.iter().zip(write_sweep(&runs, &out)?) {
                println!(
                    "{}: {} of {} non-addicted",
                    dir.display(),
                    run.result.final_non_addicted(),
                    run.result.n_replications
                );
            }
        }
        Command::Env { level, misrepresent, out } => {
            let mut spec = build(level.into(), ArmTable::default())?;
            if misrepresent {
                spec = apply_misrepresentation(&spec)?;
            }
            let mut text = spec.to_json_pretty();
            text.push('\n');
            std::fs::write(&out, text).map_err(|e| SimError::io(&out, e))?;
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            Scenario::from_config(&cfg)?;
            println!("{}: ok", config.display());
        }
        Command::Plot { kind, input, out } => {
            render_chart(&input, kind.into(), &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
