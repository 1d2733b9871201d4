//! `skewsim`: reproducible interface-diffusion experiments.
//!
//! `run` takes a JSON config and writes CSV data plus a JSON manifest whose
//! per-criterion verdicts drive the exit status (0 only when everything is
//! PASS, 1 when the run completed with FAIL or INCONCLUSIVE verdicts, 2 for
//! usage or config errors). `derive` prints the parameter block for a medium
//! and interface weight without running anything.

mod config;
mod manifest;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::manifest::Verdict;

#[derive(Parser)]
#[command(name = "skewsim", version, about = "Interface-diffusion experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; overrides SKEWSIM_WORKERS and the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the derived parameters for a medium and interface weight.
    Derive {
        #[arg(long)]
        d_minus: f64,
        #[arg(long)]
        d_plus: f64,
        /// Interface weight; exactly one of --lambda / --alpha.
        #[arg(long)]
        lambda: Option<f64>,
        /// Transmission probability; exactly one of --lambda / --alpha.
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

/// Worker precedence: flag, then SKEWSIM_WORKERS, then config, then the
/// library default pool (0).
fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize, String> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("SKEWSIM_WORKERS") {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("SKEWSIM_WORKERS: expected a worker count, got {raw:?}")),
        Err(std::env::VarError::NotPresent) => Ok(config.unwrap_or(0)),
        Err(e) => Err(format!("SKEWSIM_WORKERS: {e}")),
    }
}

fn run(
    config_path: PathBuf,
    seed: Option<u64>,
    workers_flag: Option<usize>,
    out: Option<PathBuf>,
) -> ExitCode {
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("reading {}: {e}", config_path.display())),
    };
    let mut validated = match config::parse_config(&text) {
        Ok(v) => v,
        Err(e) => return usage_error(&e),
    };
    if let Some(s) = seed {
        validated.config.seed = s;
    }
    let workers = match resolve_workers(workers_flag, validated.config.workers) {
        Ok(w) => w,
        Err(e) => return usage_error(&e),
    };
    let out_dir = out
        .or_else(|| validated.config.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let manifest = match runner::run_experiment(&validated, workers, &out_dir) {
        Ok(m) => m,
        Err(e) => return usage_error(&e),
    };
    for c in &manifest.criteria {
        match (c.std_error, c.z) {
            (Some(se), Some(z)) => println!(
                "{}: {} (observed {:.6} expected {:.6} se {:.2e} z {:+.2})",
                c.name,
                c.verdict.as_str(),
                c.observed,
                c.expected,
                se,
                z
            ),
            _ => println!(
                "{}: {} (observed {} expected {})",
                c.name,
                c.verdict.as_str(),
                c.observed,
                c.expected
            ),
        }
    }
    println!("overall: {}", manifest.overall.as_str());
    println!("manifest: {}", out_dir.join("manifest.json").display());
    if manifest.overall == Verdict::Pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn derive(d_minus: f64, d_plus: f64, lambda: Option<f64>, alpha: Option<f64>) -> ExitCode {
    match config::derive_parameters(d_minus, d_plus, lambda, alpha) {
        Ok(derived) => {
            println!("{}", serde_json::to_string_pretty(&derived).expect("derived serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => usage_error(&e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => run(config, seed, workers, out),
        Command::Derive {
            d_minus,
            d_plus,
            lambda,
            alpha,
        } => derive(d_minus, d_plus, lambda, alpha),
    }
}
