//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsjd_core::{Method, PartitionMode, SdeBoundary};

#[derive(Debug, Parser)]
#[command(
    name = "hsjd",
    version,
    about = "Simulate density-dependent reaction networks: SSA, fluid and diffusion limits, hybrid jump diffusions and a 1D Fokker-Planck solver",
    after_help = "Compatibility form: hsjd MODEL OUT METHOD STEP RUNS TMAX [-B BOUNDS]"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble of trajectories and write them as CSV.
    Simulate(SimulateArgs),
    /// Solve the Fokker-Planck equation of a one-dimensional crazy clock.
    FokkerPlanck(FokkerPlanckArgs),
    /// Mean curves and distributions from a trajectory CSV.
    Stats(StatsArgs),
    /// List the built-in models or write one as a model file.
    Models(ModelsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    #[value(alias = "sim")]
    Ssa,
    Ode,
    Sde,
    Jd,
    #[value(alias = "hsjd")]
    Hsde,
    Hode,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ssa => Method::Ssa,
            MethodArg::Ode => Method::Ode,
            MethodArg::Sde => Method::Sde,
            MethodArg::Jd => Method::Jd,
            MethodArg::Hsde => Method::Hsde,
            MethodArg::Hode => Method::Hode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Strict,
    Relaxed,
}

impl From<PartitionArg> for PartitionMode {
    fn from(p: PartitionArg) -> Self {
        match p {
            PartitionArg::Strict => PartitionMode::Strict,
            PartitionArg::Relaxed => PartitionMode::Relaxed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SdeBoundaryArg {
    Clamp,
    Stop,
}

impl From<SdeBoundaryArg> for SdeBoundary {
    fn from(b: SdeBoundaryArg) -> Self {
        match b {
            SdeBoundaryArg::Clamp => SdeBoundary::Clamp,
            SdeBoundaryArg::Stop => SdeBoundary::Stop,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model file in the reaction DSL, or the name of a built-in model.
    pub model: String,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Maximum Euler step (ignored by SSA except as a sanity bound).
    #[arg(long)]
    pub step: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trajectory CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Bounds override file: `name lower upper` per line (`inf` allowed).
    #[arg(long, short = 'B')]
    pub bounds: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub partition: Option<PartitionArg>,
    /// Sampling period of the output (default: tmax/100, at least one step).
    #[arg(long)]
    pub record: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Turn the Brownian increments off.
    #[arg(long)]
    pub no_noise: bool,
    /// Use the fixed step instead of the adaptive step rule.
    #[arg(long)]
    pub fixed_step: bool,
    /// What an SDE path does when it leaves its bounds.
    #[arg(long, value_enum, default_value = "clamp")]
    pub sde_boundary: SdeBoundaryArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FpModel {
    #[value(alias = "crazy_clock")]
    CrazyClock,
    #[value(alias = "crazy_clock_switch")]
    CrazyClockSwitch,
}

#[derive(Debug, Args)]
pub struct FokkerPlanckArgs {
    #[arg(value_enum)]
    pub model: FpModel,
    /// Number of finite-volume cells (default: smallest centred grid with at least 1000 cells).
    #[arg(long)]
    pub cells: Option<usize>,
    /// Time step (default: half the stability bound).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time (default: 0.0016, or 0.003 for the switched model).
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Spacing of the snapshots (default: tmax/4).
    #[arg(long)]
    pub interval: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Switch rate scale of the switched model.
    #[arg(long)]
    pub lambda3: Option<f64>,
    /// Switch ramp width of the switched model.
    #[arg(long)]
    pub s: Option<f64>,
    /// System size N.
    #[arg(long)]
    pub n: Option<f64>,
    /// Output prefix: writes PREFIX.grid.csv, PREFIX.masses.csv, PREFIX.pmf.csv and PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Trajectory CSV written by `simulate`.
    pub trajectories: PathBuf,
    /// Sample time of the distribution (must be on the recording grid).
    #[arg(long)]
    pub at: Option<f64>,
    /// Species to summarise (default: all for means; required with --at).
    #[arg(long)]
    pub species: Option<String>,
    /// Values reported as point masses, e.g. `--atoms 0,1000`.
    #[arg(long, value_delimiter = ',')]
    pub atoms: Vec<f64>,
    /// Histogram bin width.
    #[arg(long, default_value_t = 1.0)]
    pub bins: f64,
    /// Output prefix: writes PREFIX.mean.csv and, with --at, PREFIX.pmf.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group = clap::ArgGroup::new("action").required(true).args(["list", "emit"]))]
pub struct ModelsArgs {
    /// Print the built-in model names.
    #[arg(long)]
    pub list: bool,
    /// Print a built-in model in the DSL.
    #[arg(long, value_name = "NAME")]
    pub emit: Option<String>,
    /// Write the emitted model to a file instead of standard output.
    #[arg(long, requires = "emit")]
    pub out: Option<PathBuf>,
}

const SUBCOMMANDS: [&str; 5] = ["simulate", "fokker-planck", "stats", "models", "help"];

/// Rewrites the positional compatibility form
/// `MODEL OUT METHOD STEP RUNS TMAX [-B FILE] [extra flags]` into the
/// `simulate` subcommand; any other argument list is returned unchanged.
pub fn rewrite_positional(args: Vec<String>) -> Vec<String> {
    let Some(first) = args.get(1) else {
        return args;
    };
    if first.starts_with('-') || SUBCOMMANDS.contains(&first.as_str()) {
        return args;
    }
    if args.len() < 7 || args[1..7].iter().any(|a| a.starts_with('-')) {
        return args;
    }
    let mut out = vec![
        args[0].clone(),
        "simulate".into(),
        args[1].clone(),
        "--out".into(),
        args[2].clone(),
        "--method".into(),
        args[3].clone(),
        "--step".into(),
        args[4].clone(),
        "--runs".into(),
        args[5].clone(),
        "--tmax".into(),
        args[6].clone(),
    ];
    out.extend(args[7..].iter().cloned());
    out
}
