//! `radloc`: simulate, localize, replay and diagnose from scenario files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use radloc::io::BinMode;
use radloc::{ForwardModel, LikelihoodMode, PriorKind};

#[derive(Debug, Parser)]
#[command(name = "radloc", version, about = "Particle-filter localization of a radiation source")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate detector counts from the scenario source and write counts.csv.
    Simulate(SimulateArgs),
    /// Simulate counts and run the filter on them, optionally moving detectors.
    Localize(LocalizeArgs),
    /// Run the filter on recorded counts.
    Replay(ReplayArgs),
    /// Monte Carlo convergence study on simulated counts.
    Diagnose(DiagnoseArgs),
}

/// Scenario overrides shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Root seed; overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_particles: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Forward model: qa or rt.
    #[arg(long)]
    pub model: Option<ForwardModel>,
    /// poisson or gaussian:SIGMA.
    #[arg(long)]
    pub likelihood: Option<LikelihoodMode>,
    /// box, hull or kde.
    #[arg(long)]
    pub prior: Option<PriorKind>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write background-only frames to background.csv.
    #[arg(long)]
    pub background: Option<usize>,
    /// Write only background frames (no source contribution) to counts.csv.
    #[arg(long)]
    pub background_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MobilityArg {
    Off,
    MeanPursuit,
    Kde,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario [mobility] section.
    #[arg(long, value_enum)]
    pub mobility: Option<MobilityArg>,
    /// Write every step's weighted ensemble to particles.csv.
    #[arg(long)]
    pub history: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub counts: PathBuf,
    /// Background survey; matched to detectors by nearest position.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = BinMode::Bin12)]
    pub bin_mode: BinMode,
    /// Replace the record by this many Poisson frames around its mean.
    #[arg(long)]
    pub augment: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhiArg {
    X,
    Y,
    Intensity,
    One,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = PhiArg::X)]
    pub phi: PhiArg,
    /// Particle counts to test, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 400, 1600])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    /// Defaults to 64 times the largest tested count.
    #[arg(long)]
    pub reference_n: Option<usize>,
    /// Also write the report to this directory as diagnose.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
