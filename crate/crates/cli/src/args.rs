use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pedflow", version, about = "Bidirectional pedestrian flow: CA, mesoscopic and PDE tiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one tier of a scenario and write snapshot CSVs.
    Run(RunArgs),
    /// Compare a reference run (CA, meso or PDE) against a PDE run.
    Compare(CompareArgs),
    /// Write the hyperbolicity classification of the density square.
    Hypmap(HypmapArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tier {
    Ca,
    Meso,
    Pde,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Ca => "ca",
            Tier::Meso => "meso",
            Tier::Pde => "pde",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub tier: Tier,
    /// Built-in scenario name or path to a JSON scenario (or CA config).
    pub scenario: String,
    /// Output directory [default: runs/<tier>-<scenario>].
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mc_runs: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// PDE cell size; must divide the domain length.
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Hop probability `c dt` instead of `c dt / h`.
    #[arg(long)]
    pub literal_rates: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Run directory of the reference (usually CA) run.
    pub reference: PathBuf,
    /// Run directory of the PDE run.
    pub pde: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HypmapArgs {
    /// Slowdown ratio: c0 = 1, c1 = c2 = 1/a, c3 = 1/(2a).
    #[arg(long, conflicts_with_all = ["c0", "c1", "c2", "c3"])]
    pub a: Option<f64>,
    #[arg(long, requires_all = ["c1", "c2", "c3"])]
    pub c0: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub c3: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}
