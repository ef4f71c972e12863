use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geoqod::error::Error;
use geoqod::harness::run_scenario;
use geoqod::metrics::{compare, read_csv_path};
use geoqod::scenario::Scenario;

/// Deterministic multi-cluster replication simulator.
#[derive(Parser)]
#[command(name = "geoqod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for CSV and trace files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the scenario's workload seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to quiescence and write its CSV.
    Run { scenario: PathBuf },
    /// Compare two run CSVs (ratios are B relative to A).
    Compare { csv_a: PathBuf, csv_b: PathBuf },
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Scenario(_) | Error::InvalidContainerId(_) | Error::InvalidSigmaPercent(_) | Error::EmptyWorkload => 2,
        Error::Livelock { .. } => 3,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Error> {
    let scenario = Scenario::from_path(path)?;
    Ok(match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Validate { scenario } => {
            let s = load(scenario, cli.seed)?;
            if !cli.quiet {
                println!(
                    "{}: ok ({} clusters, {} links, {} operations, {} updates)",
                    s.name,
                    s.clusters.len(),
                    s.links.len(),
                    s.workload.total_operations,
                    s.workload.total_updates()
                );
            }
        }
        Command::Run { scenario } => {
            let s = load(scenario, cli.seed)?;
            let dir = cli.out.clone().or_else(|| s.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let result = run_scenario(s)?;
            let written = result.write_outputs(&dir)?;
            if !cli.quiet {
                print!("{}", result.report.summary);
                for path in written {
                    println!("wrote: {}", path.display());
                }
            }
        }
        Command::Compare { csv_a, csv_b } => {
            let c = compare(&read_csv_path(csv_a)?, &read_csv_path(csv_b)?)?;
            if !cli.quiet {
                print!("{c}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
