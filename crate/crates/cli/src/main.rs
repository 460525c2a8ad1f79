//! `nanolev` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid input (arguments, configuration, domain
//! of an engine, unwritable output), 3 numerical failure.

mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nanolev", version, about = "Feedback-cooled levitated nanoparticle: steady states, dynamics and cross-checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Parameter file (`key = value` lines). Output files of this tool are
    /// accepted too; their provenance header carries the parameters.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named parameter set (see `presets`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override one parameter, e.g. `--set N0=1e3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, env = "NANOLEV_OUT", default_value = ".", global = true)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1, global = true)]
    pub seed: u64,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived coefficients and the damping regime.
    Derive,
    /// Closed-form steady states and moments.
    Analytic(AnalyticArgs),
    /// Evolve the phase-space equation on a grid.
    Fp2d(Fp2dArgs),
    /// Stochastic trajectories.
    Langevin(LangevinArgs),
    /// Integrate the closed moment equations.
    Moments(MomentsArgs),
    /// Bistability scan over the effective damping.
    Scan(ScanArgs),
    /// Pairwise L1 distances between the position densities of all routes.
    Crosscheck(CrosscheckArgs),
    /// List named parameter sets, or print or write one.
    Presets(PresetsArgs),
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Points of the tabulated densities.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Half-width of the position table in units of the steady rms position.
    #[arg(long, default_value_t = 6.0)]
    pub span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// Thermal state at the predicted steady variance.
    Steady,
    /// Thermal state at `N0`.
    Hot,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Cells per axis.
    #[arg(long, default_value_t = 257)]
    pub cells: usize,
    /// Half-extent in predicted standard deviations (default 15 for a
    /// steady start, whose tails decay slowly, and 5 for a hot start).
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long, value_enum, default_value_t = Start::Steady)]
    pub start: Start,
}

#[derive(Debug, Args)]
pub struct Fp2dArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Run until the steady-state residual drops below `--tol`.
    #[arg(long)]
    pub steady: bool,
    /// End time for a transient run.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Moment samples over a transient run.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Steady-state residual per unit time.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Check windows before giving up on convergence.
    #[arg(long, default_value_t = 50)]
    pub max_windows: usize,
    /// Thermal phonon number of the initial state (overrides `--start`).
    #[arg(long)]
    pub init_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Full,
    Overdamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalculusArg {
    Stratonovich,
    Ito,
}

#[derive(Debug, Args)]
pub struct LangevinArgs {
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = CalculusArg::Stratonovich)]
    pub calculus: CalculusArg,
    #[arg(long, default_value_t = 1000)]
    pub traj: usize,
    /// Time step (default: trap period / 500 full, / 1000 overdamped).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 160)]
    pub bins: usize,
    /// Histogram half-width in units of the steady rms position.
    #[arg(long, default_value_t = 5.0)]
    pub span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClosureArg {
    Gaussian,
    Hierarchy,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ClosureArg::Gaussian)]
    pub closure: ClosureArg,
    /// Initial thermal phonon number (default `N0`).
    #[arg(long)]
    pub init_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Analytic,
    Fp2d,
    Langevin,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value_t = EngineArg::Analytic)]
    pub engine: EngineArg,
    /// Smallest effective damping.
    #[arg(long, default_value_t = 1e-3)]
    pub lo: f64,
    /// Largest effective damping.
    #[arg(long, default_value_t = 10.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// fp2d engine: cells per axis.
    #[arg(long, default_value_t = 129)]
    pub cells: usize,
    /// Langevin engine: trajectories per row.
    #[arg(long, default_value_t = 200)]
    pub traj: usize,
}

#[derive(Debug, Args)]
pub struct CrosscheckArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1000)]
    pub traj: usize,
    /// Langevin time step (default as for `langevin`).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 160)]
    pub bins: usize,
    /// Leave out the grid solver.
    #[arg(long)]
    pub skip_fp2d: bool,
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    /// Print the parameters of one set in config format.
    #[arg(long, value_name = "NAME", conflicts_with = "write")]
    pub show: Option<String>,
    /// Write `<NAME>.cfg` into the output directory.
    #[arg(long, value_name = "NAME")]
    pub write: Option<String>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nanolev: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
