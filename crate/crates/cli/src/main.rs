use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bes_core::benchmarks::registry;
use bes_core::runner::{load_benchmark, persist, read_records_csv, results_dir, summarize, Summary, RESULTS_DIR_ENV};
use bes_core::{run_experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

/// Information-theoretic level set estimation and Bayesian optimization
/// experiments.
#[derive(Debug, Parser)]
#[command(name = "bes", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a key-value config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the environment variable).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available benchmark functions.
    ListBenchmarks,
    /// Summarize a records CSV: per-iteration mean, SD and log10 of the mean.
    Summarize {
        records: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn print_table(summary: &Summary) {
    println!("{:>9} {:>5} {:>14} {:>14} {:>11}", "iteration", "n", "mean", "sd", "log10_mean");
    for row in &summary.iterations {
        println!("{:>9} {:>5} {:>14.6e} {:>14.6e} {:>11.4}", row.iteration, row.count, row.mean, row.sd, row.log10_mean);
    }
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
    let benchmark = load_benchmark(&cfg)?;
    log::info!(
        "{} on {} with {}: {} repetitions x {} iterations",
        cfg.problem,
        benchmark.name(),
        cfg.criterion,
        cfg.repetitions,
        cfg.iterations
    );
    let records = run_experiment(&cfg)?;
    let dir = out.unwrap_or_else(results_dir);
    let files = persist(&cfg, &records, benchmark.dim(), &dir)
        .with_context(|| format!("writing results to {} (set {RESULTS_DIR_ENV} or --out)", dir.display()))?;
    if let Some(last) = summarize(&records).iterations.last() {
        println!("final iteration {}: mean metric {:.6e} (sd {:.3e}, n = {})", last.iteration, last.mean, last.sd, last.count);
    }
    println!("records: {}", files.records.display());
    println!("summary: {}", files.summary.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::ListBenchmarks => {
            for b in registry() {
                println!("{:<40} d={} {:<18} {}", b.name, b.dim, b.domain, b.note);
            }
            Ok(())
        }
        Command::Summarize { records, json } => (|| {
            let rows = read_records_csv(&records).with_context(|| format!("reading {}", records.display()))?;
            let summary = summarize(&rows);
            if json {
                println!("{}", summary.to_json()?);
            } else {
                print_table(&summary);
            }
            Ok(())
        })(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
