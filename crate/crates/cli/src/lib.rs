//! Command-line front end for `trustnet-core`.
//!
//! Every subcommand resolves its settings (flag, then `--config` file, then
//! built-in default), runs one experiment and writes a CSV table whose
//! comment header records the resolved settings. Output goes to `--out`, or
//! to `$TRUSTNET_OUT_DIR/<command>.csv` when that variable is set, or to
//! standard output.
//!
//! Exit codes: 0 on success, 1 on usage or I/O errors, 2 when a numerical
//! method fails to converge.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::ConfigError;
use output::OutputError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TRUSTNET_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trustnet", version, about = "Trust dynamics on credit networks")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any flag
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output CSV path [default: $TRUSTNET_OUT_DIR/<command>.csv, else stdout]
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One event-driven run; prints the connectivity summary
    Simulate(SimulateArgs),
    /// Quasi-static sweep in c or b0, carrying the network between points
    Sweep(SweepArgs),
    /// Self-consistent master-equation solution at one c or along a c range
    MasterEq(MasterEqArgs),
    /// Fixed points of the mean-field default-rate equation
    MeanField(MeanFieldArgs),
    /// Mean-field phase labels over a (lambda, c) grid
    PhaseDiagram(PhaseDiagramArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::MasterEq(_) => "master-eq",
            Command::MeanField(_) => "mean-field",
            Command::PhaseDiagram(_) => "phase-diagram",
        }
    }
}

/// Model constants shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Loan-formation rate per agent [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Maturation rate per loan [default: 0.05]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Disclosure rate per agent [default: 2]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Liquid assets per agent [default: 2]
    #[arg(long)]
    pub b0: Option<f64>,
    /// Cost of miscoordination [default: 0.5]
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of agents [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
}

/// Time horizon and seeding of stochastic runs.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Total simulated time per run [default: 2 x burn-in]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Time discarded before sampling [default: max(100, 20/lambda)]
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Spacing of connectivity samples [default: 1/nu, or 1 when nu = 0]
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Base random seed; sweep points use derived seeds [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Empty,
    Dense,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Starting network [default: empty]
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Also write the final in/out-degree histograms to this CSV
    #[arg(long, value_name = "FILE")]
    pub degrees: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    C,
    B0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Swept parameter [default: c]
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    /// Lower end of the c range [default: 0.5]
    #[arg(long)]
    pub c_from: Option<f64>,
    /// Upper end of the c range [default: 1.2]
    #[arg(long)]
    pub c_to: Option<f64>,
    /// Lower end of the b0 range [default: 0]
    #[arg(long)]
    pub b0_from: Option<f64>,
    /// Upper end of the b0 range [default: 4]
    #[arg(long)]
    pub b0_to: Option<f64>,
    /// Number of grid points, ends included [default: 15]
    #[arg(long)]
    pub steps: Option<usize>,
    /// `up`, `down`, or `both` (up, then back down from the top network) [default: both]
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    /// All default rates start at zero
    Dense,
    /// All default rates start at nu
    Sparse,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MasterEqArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Starting rates, selecting the branch [default: dense]
    #[arg(long, value_enum)]
    pub init: Option<BranchArg>,
    /// End of a warm-started c sweep starting at --c [default: none]
    #[arg(long)]
    pub c_to: Option<f64>,
    /// Points of the c sweep, ends included [default: 1]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Lattice bound for both ell and b [default: gamma/lambda + 12 sqrt(gamma/lambda) + 20, at most 600]
    #[arg(long)]
    pub max_ell: Option<usize>,
    /// Convergence bound on the rate residual [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial damping of the rate update [default: 0.5]
    #[arg(long)]
    pub damping: Option<f64>,
    /// Outer iteration budget [default: 5000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Write the converged P(ell, b) here (single point only)
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsArg {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MeanFieldArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Closure of the default probability [default: gaussian]
    #[arg(long, value_enum)]
    pub rhs: Option<RhsArg>,
    /// Bracketing intervals on [0, nu] [default: 1000]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Root tolerance [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhaseDiagramArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Smallest lambda [default: 0.01]
    #[arg(long)]
    pub lambda_from: Option<f64>,
    /// Largest lambda [default: 0.5]
    #[arg(long)]
    pub lambda_to: Option<f64>,
    /// Number of lambda values [default: 12]
    #[arg(long)]
    pub lambda_steps: Option<usize>,
    /// Space lambda values geometrically [default: true]
    #[arg(long)]
    pub log_lambda: Option<bool>,
    /// Smallest c [default: 0]
    #[arg(long)]
    pub c_from: Option<f64>,
    /// Largest c [default: 1.5]
    #[arg(long)]
    pub c_to: Option<f64>,
    /// Number of c values [default: 31]
    #[arg(long)]
    pub c_steps: Option<usize>,
}

/// Parses `args` and runs the command. `out_dir` stands in for the
/// environment variable so callers can test it.
pub fn run_with<I, T>(args: I, out_dir: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    1
                }
            };
        }
    };
    match commands::execute(&cli, out_dir, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the binary.
pub fn run_from_env() -> i32 {
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    run_with(std::env::args_os(), out_dir, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
