//! Command-line runner.
//!
//! Exit codes: 0 clean run, 1 I/O failure, 2 configuration or usage error,
//! 3 runtime invariant violation, 4 reports not comparable.
//! Log verbosity comes from `WSN_HIDS_LOG` (e.g. `info`, `debug`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wsn_hids::engine::Simulation;
use wsn_hids::metrics::{compare, render_ratios, MetricsReport};
use wsn_hids::scenario::Scenario;
use wsn_hids::Error;

#[derive(Parser)]
#[command(name = "wsn-hids", version, about = "Hierarchical WSN intrusion detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the flat metrics document here.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ratios of a variant metrics file against a baseline.
    Compare { baseline: PathBuf, variant: PathBuf },
}

enum Failure {
    Io(String),
    Sim(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Sim(Error::Invariant(_)) => 3,
            Failure::Sim(Error::ScaleMismatch(_)) => 4,
            Failure::Sim(Error::InvalidConfig(_) | Error::MalformedRule(_)) => 2,
            Failure::Sim(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "{m}"),
            Failure::Sim(e) => write!(f, "{e}"),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(
    path: &Path,
    trace: Option<&Path>,
    metrics: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let mut scenario = Scenario::load(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    log::info!("running {} with seed {}", path.display(), scenario.seed);
    let mut sim = Simulation::new(scenario, trace.is_some())?;
    sim.run()?;
    let report = MetricsReport::from_simulation(&sim)?;
    if let Some(p) = trace {
        write(p, &sim.trace().render())?;
    }
    if let Some(p) = metrics {
        write(p, &report.to_flat())?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn compare_files(a: &Path, b: &Path) -> Result<(), Failure> {
    let base = MetricsReport::parse(&read(a)?)?;
    let variant = MetricsReport::parse(&read(b)?)?;
    print!("{}", render_ratios(&compare(&base, &variant)?));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WSN_HIDS_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            trace,
            metrics,
            seed,
        } => run(scenario, trace.as_deref(), metrics.as_deref(), *seed),
        Command::Compare { baseline, variant } => compare_files(baseline, variant),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
