use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kantoreg_harness::{report, run, ExperimentConfig, HarnessError, RunOptions, Until};

/// Discrete optimal transport experiments with regularity diagnostics.
#[derive(Parser)]
#[command(name = "kantoreg", version)]
struct Cli {
    /// JSON experiment config; identity densities on the unit square when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the seed list of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the delta list of the config; repeatable.
    #[arg(long = "delta", global = true)]
    deltas: Vec<f64>,
    #[arg(long, global = true, value_parser = ["ball", "sphere"])]
    kernel: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize source and target at each delta.
    Discretize,
    /// Discretize and solve.
    Solve,
    /// Solve, scan sections and run one diagnostic.
    Diagnose {
        /// sections, sobolev, contact, heights, chebyshev or modulus
        check: String,
    },
    /// Every stage and enabled diagnostic, then the summary and plots.
    Sweep,
    /// Summary and plots from the reports of an earlier run.
    Report,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let d = *cli
                .deltas
                .first()
                .ok_or_else(|| HarnessError::Config("give --config or at least one --delta".into()))?;
            ExperimentConfig::minimal(d)
        }
    };
    if !cli.deltas.is_empty() {
        cfg.deltas = cli.deltas.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(k) = &cli.kernel {
        cfg.kernel = k.clone();
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    let cfg = config(&cli)?;
    let until = match &cli.command {
        Command::Discretize => Until::Discretize,
        Command::Solve => Until::Solve,
        Command::Diagnose { check } => Until::Diagnose(check.clone()),
        Command::Sweep | Command::Report => Until::Sweep,
    };
    let opts = RunOptions { out: PathBuf::from(&cfg.output_dir), cache: None, jobs: cli.jobs, until };
    let mut ledger = match cli.command {
        Command::Report => report(&cfg, &opts)?,
        _ => run(&cfg, &opts)?,
    };
    if let Command::Sweep = cli.command {
        ledger.entries.extend(report(&cfg, &opts)?.entries);
    }
    let failed = ledger.failed();
    println!(
        "config {}: {} completed, {} skipped, {} failed",
        &ledger.config_hash[..12],
        ledger.completed(),
        ledger.skipped(),
        failed.len()
    );
    for e in &failed {
        eprintln!("failed {} seed {:?} delta {:?}: {}", e.stage, e.seed, e.delta, e.error.as_deref().unwrap_or(""));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Stage(format!("{} stage(s) failed", failed.len())))
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kantoreg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
