use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gfflab_harness::config::load_config;
use gfflab_harness::output::{resolve_workers, simulate, WORKERS_ENV};
use gfflab_harness::summarize::summarize;
use gfflab_harness::{Experiment, HarnessError};

#[derive(Parser)]
#[command(
    name = "gfflab",
    version,
    about = "GFF level-set percolation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and append its records to a JSONL file.
    Simulate {
        #[arg(value_enum)]
        experiment: Experiment,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a JSONL record file into CSV tables.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate {
            experiment,
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let env = std::env::var(WORKERS_ENV).ok();
            let workers = resolve_workers(workers, env.as_deref(), &cfg)?;
            let out = out.or_else(|| cfg.out.clone()).ok_or_else(|| {
                HarnessError::Config("no output path (use --out or `out` in the config)".into())
            })?;
            let n = simulate(&cfg, experiment, workers, &out)?;
            eprintln!("{experiment}: {n} records appended to {}", out.display());
        }
        Command::Summarize { input, out } => {
            let s = summarize(&input, &out)?;
            if s.estimates.is_empty() {
                eprintln!(
                    "warning: {} holds no records; wrote empty tables",
                    input.display()
                );
            }
            eprintln!(
                "{} estimates, {} slope fits written to {}",
                s.estimates.len(),
                s.slopes.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
