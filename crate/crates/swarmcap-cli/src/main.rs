use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmcap_cli::{execute, parse_config, summarize, Overrides};

/// Deterministic UAV swarm area-search simulator: connectivity-aware
/// pheromone mobility against repel-pheromone and chaotic-flocking
/// baselines.
#[derive(Parser)]
#[command(name = "swarmcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded scenario sweep from a JSON config file.
    Run {
        /// Experiment file; flags and SWARMCAP_* environment variables
        /// override its values.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a comparison table from a summary.csv.
    Summarize {
        /// Summary file produced by `run`.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, overrides } => {
            let spec = match parse_config(&config, &overrides) {
                Ok(spec) => spec,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            eprintln!(
                "running {} point(s) x {} seed(s) on {} worker(s)",
                spec.points.len(),
                spec.runs_per_point,
                spec.jobs
            );
            match execute(&spec) {
                Ok(report) => {
                    eprintln!(
                        "wrote {} and {}{}",
                        report.runs_csv.display(),
                        report.summary_csv.display(),
                        report
                            .timeseries_csv
                            .as_ref()
                            .map(|p| format!(" and {}", p.display()))
                            .unwrap_or_default()
                    );
                    if report.failed_runs > 0 {
                        eprintln!(
                            "error: {}/{} runs failed (see status column)",
                            report.failed_runs, report.total_runs
                        );
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Summarize { input } => {
            let mut stdout = std::io::stdout().lock();
            match summarize(&input, &mut stdout) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
