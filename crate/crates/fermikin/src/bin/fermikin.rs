//! Scenario runner. Exit codes: 0 all invariants pass, 1
//! configuration or I/O error, 2 invariant or comparison failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fermikin::scenario::{self, CompareVariant};

#[derive(Parser)]
#[command(name = "fermikin", about = "Fermionic one-particle kinetics simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files, writing trajectory CSV and an
    /// invariant report per scenario.
    Simulate {
        /// Scenario JSON files.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run up to K scenarios concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a limit/duality comparison on a scenario.
    Compare {
        scenario: PathBuf,
        /// One of: low_density, hole_dual, picard_vs_rk4,
        /// markoff_vs_lindblad, incoherent.
        #[arg(long)]
        variant: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-run a scenario and verify a previously written CSV.
    Check {
        trajectory: PathBuf,
        scenario: PathBuf,
    },
}

fn run_one(path: &PathBuf, out: &PathBuf) -> i32 {
    let scenario = match scenario::parse_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return 1;
        }
    };
    match scenario::run(&scenario, out) {
        Ok(outcome) => {
            if outcome.pass {
                println!("{}: ok ({})", scenario.name, outcome.csv_path.display());
            } else {
                match outcome.first_failure_t {
                    Some(t) => eprintln!("{}: invariant failure at t = {t}", scenario.name),
                    None => eprintln!("{}: invariant failure", scenario.name),
                }
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("{}: {e}", scenario.name);
            1
        }
    }
}

fn simulate(scenarios: Vec<PathBuf>, out: PathBuf, jobs: usize) -> i32 {
    let jobs = jobs.max(1);
    if jobs == 1 || scenarios.len() <= 1 {
        return scenarios.iter().map(|p| run_one(p, &out)).max().unwrap_or(1);
    }
    let mut worst = 0;
    for chunk in scenarios.chunks(jobs) {
        let codes: Vec<i32> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|p| {
                    let out = out.clone();
                    scope.spawn(move || run_one(p, &out))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or(1)).collect()
        });
        worst = worst.max(codes.into_iter().max().unwrap_or(1));
    }
    worst
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { scenarios, out, jobs } => simulate(scenarios, out, jobs),
        Command::Compare { scenario: path, variant, out } => {
            let Some(variant) = CompareVariant::parse(&variant) else {
                eprintln!("unknown comparison variant '{variant}'");
                return ExitCode::from(1);
            };
            match scenario::parse_scenario(&path).and_then(|s| scenario::compare(&s, variant, &out))
            {
                Ok(outcome) => {
                    if outcome.pass {
                        println!("{}: ok ({})", variant.name(), outcome.report_path.display());
                    } else {
                        eprintln!("{}: comparison failed", variant.name());
                    }
                    outcome.exit_code
                }
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    1
                }
            }
        }
        Command::Check { trajectory, scenario: spath } => {
            match scenario::parse_scenario(&spath).and_then(|s| scenario::check(&trajectory, &s)) {
                Ok(code) => {
                    if code == 0 {
                        println!("{}: verified", trajectory.display());
                    } else {
                        eprintln!("{}: mismatch against re-run", trajectory.display());
                    }
                    code
                }
                Err(e) => {
                    eprintln!("{e}");
                    1
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
