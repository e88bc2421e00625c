use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use czsd_core::runner::{self, RunConfig};
use czsd_core::Algorithm;

/// Compressed zeroth-order distributed optimization simulator.
///
/// Log verbosity follows `RUST_LOG` (default `info`).
#[derive(Parser)]
#[command(name = "czsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a JSON run config and write traces plus `summary.json`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the configured seed list (repeatable).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        iters: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let Command::Run {
        config,
        seeds,
        out,
        algo,
        iters,
    } = cli.command;

    let mut cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if !seeds.is_empty() {
        cfg.seeds = seeds;
    }
    if let Some(a) = algo {
        cfg.algorithm = a;
    }
    if let Some(t) = iters {
        cfg.iterations = t;
    }
    if out.is_some() {
        cfg.out_dir = out;
    }

    let output = runner::run(&cfg)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = output
        .write(&dir)
        .with_context(|| format!("writing into {}", dir.display()))?;
    for f in &files {
        log::info!("wrote {}", f.display());
    }

    let s = &output.summary;
    if let Some(p) = s.final_p {
        println!(
            "{}: P(T) mean {:.4e} [min {:.4e}, max {:.4e}] over {} seed(s), {} diverged",
            s.algorithm.name(),
            p.mean,
            p.min,
            p.max,
            s.seeds.len(),
            s.diverged_seeds
        );
    }
    for t in &s.bits_to_threshold {
        match t.bits {
            Some(b) => println!(
                "  P <= {:e}: {}/{} seeds, mean bits {:.4e}",
                t.threshold,
                t.reached,
                s.seeds.len(),
                b.mean
            ),
            None => println!("  P <= {:e}: not reached", t.threshold),
        }
    }
    Ok(())
}
