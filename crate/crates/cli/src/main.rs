use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gffpin_core::experiments::{render_tables, run_experiment, RunConfig};
use gffpin_core::suites::{run_check, suite, CHECKS};

/// Worker threads for parallel tasks; defaults to one per core.
const WORKERS_VAR: &str = "GFFPIN_WORKERS";

#[derive(Parser)]
#[command(name = "gffpin", version, about = "Free field pinning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config (or a run manifest).
    Run { config: PathBuf },
    /// Run an acceptance suite: all, fast, mcmc, a check name, or c<id>.
    Verify { suite: String },
    /// Print the CSV tables of one run directory or of all runs below it.
    Tables { results: PathBuf },
}

fn pool() -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| format!("{WORKERS_VAR} must be a positive integer, got {v:?}"))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

fn run(config: PathBuf) -> Result<bool, String> {
    let cfg = RunConfig::load(&config).map_err(|e| format!("{}: {e}", config.display()))?;
    let manifest = run_experiment(&cfg).map_err(|e| e.to_string())?;
    println!(
        "{} finished in {:.1} s -> {}",
        manifest.experiment,
        manifest.seconds,
        cfg.output.display()
    );
    for f in &manifest.files {
        println!("  {f}");
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    Ok(true)
}

fn verify(name: &str) -> Result<bool, String> {
    let ids = suite(name).ok_or_else(|| {
        let names: Vec<&str> = CHECKS.iter().map(|(_, n)| *n).collect();
        format!(
            "unknown suite {name:?}; use all, fast, mcmc, c1..c11 or one of {}",
            names.join(", ")
        )
    })?;
    let mut passed = 0;
    for &id in &ids {
        match run_check(id) {
            Ok(report) => {
                print!("{}", report.render());
                passed += report.passed() as usize;
            }
            Err(e) => println!("FAIL C{id} {}: {e}", CHECKS[id - 1].1),
        }
    }
    println!("{passed}/{} checks passed", ids.len());
    Ok(passed == ids.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = pool().and_then(|pool| {
        pool.install(|| match cli.command {
            Command::Run { config } => run(config),
            Command::Verify { suite } => verify(&suite),
            Command::Tables { results } => render_tables(&results)
                .map(|t| {
                    print!("{t}");
                    true
                })
                .map_err(|e| e.to_string()),
        })
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
