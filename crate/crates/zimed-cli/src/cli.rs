//! Command-line surface. Everything here is declarative; the work happens
//! in [`crate::run`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zimed_core::MediatorFamily;

#[derive(Debug, Parser)]
#[command(
    name = "zimed",
    version,
    about = "Mediation effects with a zero-inflated, possibly under-detected mediator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the outcome and mediator model to a CSV file and report effects.
    Fit(FitArgs),
    /// Run a replicated simulation study and summarize it.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Outcome column.
    #[arg(long, default_value = "y")]
    pub y: String,

    /// Recorded mediator column (zeros may be masked positives).
    #[arg(long, default_value = "m")]
    pub m: String,

    /// Exposure column.
    #[arg(long, default_value = "x")]
    pub x: String,

    /// Confounder column; repeat the flag for several.
    #[arg(long)]
    pub z: Vec<String>,

    /// Mediator family, or auto to pick by AIC among applicable candidates.
    #[arg(long, value_enum, default_value_t = FamilyChoice::Auto)]
    pub family: FamilyChoice,

    /// Reference exposure level.
    #[arg(long, default_value_t = 0.0)]
    pub x1: f64,

    /// Comparison exposure level.
    #[arg(long, default_value_t = 1.0)]
    pub x2: f64,

    /// Mediator value the controlled direct effect holds fixed.
    #[arg(long = "cde-m", default_value_t = 0.0)]
    pub cde_m: f64,

    /// Recording ceiling: a mediator above it is never masked to zero.
    #[arg(long = "B", default_value_t = 20.0)]
    pub ceiling: f64,

    /// Two-sided confidence level for effect intervals.
    #[arg(long = "ci-level", default_value_t = 0.95)]
    pub ci_level: f64,

    /// Echoed in reports for provenance; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = OutputMode::Table)]
    pub output: OutputMode,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset name (zilon, zinb, zip) or path to a key = value scenario file.
    #[arg(long)]
    pub scenario: String,

    /// Base seed; replicate r draws from the stream (seed, r).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Override the scenario's records per replicate.
    #[arg(long)]
    pub n: Option<usize>,

    /// Override the scenario's replicate count.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Also write the effect summary rows to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = OutputMode::Table)]
    pub output: OutputMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    Auto,
    Zilon,
    Zinb,
    Zip,
}

impl FamilyChoice {
    /// `None` means select by AIC.
    pub fn family(self) -> Option<MediatorFamily> {
        match self {
            FamilyChoice::Auto => None,
            FamilyChoice::Zilon => Some(MediatorFamily::LogNormal),
            FamilyChoice::Zinb => Some(MediatorFamily::NegBinomial),
            FamilyChoice::Zip => Some(MediatorFamily::Poisson),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FamilyChoice::Auto => "auto",
            FamilyChoice::Zilon => "zilon",
            FamilyChoice::Zinb => "zinb",
            FamilyChoice::Zip => "zip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    Json,
    Table,
    Both,
}

impl OutputMode {
    pub fn wants_json(self) -> bool {
        matches!(self, OutputMode::Json | OutputMode::Both)
    }

    pub fn wants_table(self) -> bool {
        matches!(self, OutputMode::Table | OutputMode::Both)
    }
}
