//! conekit — command-line verification pipelines for plurisubharmonic
//! potentials, gluing, radial flows, and level-set geometry.
//!
//! Every subcommand reads a TOML experiment config, runs its pipeline, and
//! writes `report.json` (plus CSV dumps with `--csv`) into the output
//! directory. Exit code 0 means every certificate passed, 1 means at least
//! one failed, 2 means the configuration or IO was bad — the diagnostic on
//! stderr names the offending key.

mod config;
mod output;
mod runner;

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use conekit::CalcError;

use config::ExperimentConfig;
use runner::RunContext;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CalcError> for CliError {
    fn from(e: CalcError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "conekit",
    version,
    about = "Certified numerical checks for potentials, gluing, flows, and level sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory for report.json and CSV dumps.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the seed from the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for sample sweeps (default: available parallelism).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Also write CSV plot data.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the Levi form of a potential on seeded samples.
    Levi(Common),
    /// Certify a strict plurisubharmonicity margin.
    PshCheck(Common),
    /// Probe the regularized maximum on a grid: exactness, bounds, convexity.
    RegmaxProbe(Common),
    /// Glue a subvariety potential into the ambient one and verify it.
    Glue(Common),
    /// Verify the radial scaling law and backward contraction.
    Flow(Common),
    /// Verify unique level crossings and flow projection residuals.
    Project(Common),
    /// Verify the curvature identity on the round level set.
    SasakiCheck(Common),
    /// Deform a Reeb direction to the nearest quasi-regular one.
    ReebDeform(Common),
    /// Check orbit closure of a torus flow direction.
    OrbitCheck(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Levi(_) => "levi",
            Command::PshCheck(_) => "psh-check",
            Command::RegmaxProbe(_) => "regmax-probe",
            Command::Glue(_) => "glue",
            Command::Flow(_) => "flow",
            Command::Project(_) => "project",
            Command::SasakiCheck(_) => "sasaki-check",
            Command::ReebDeform(_) => "reeb-deform",
            Command::OrbitCheck(_) => "orbit-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Levi(c)
            | Command::PshCheck(c)
            | Command::RegmaxProbe(c)
            | Command::Glue(c)
            | Command::Flow(c)
            | Command::Project(c)
            | Command::SasakiCheck(c)
            | Command::ReebDeform(c)
            | Command::OrbitCheck(c) => c,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

/// Run one subcommand end to end; Ok(pass) reflects the report verdict.
fn run(command: &Command) -> Result<bool, CliError> {
    let common = command.common();
    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        CliError::Io(format!("cannot read config {}: {e}", common.config.display()))
    })?;
    let config = ExperimentConfig::parse(&text)?;
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Config("config key `workers`: must be at least 1".into()));
    }

    let ctx = RunContext {
        config: &config,
        seed_flag: common.seed,
        workers,
        csv: common.csv,
    };
    let started = Instant::now();
    let result = runner::run_command(command.name(), &ctx)?;
    let elapsed = started.elapsed().as_secs_f64();

    let report = output::envelope(
        &result,
        config.echo(),
        config.experiment.as_deref(),
        elapsed,
    );
    output::write_artifacts(&common.out, &report, &result.csv_files)?;
    Ok(result.report.pass())
}
