use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Transient-growth bounds for linear ODEs, difference equations and delay
/// equations from pseudospectra, checked against simulation.
///
/// PROBLEM is a preset name (see `pseudobound presets`) or a JSON problem file.
#[derive(Parser)]
#[command(name = "pseudobound", version, about, long_about = None)]
struct Cli {
    /// Directory receiving CSV files and manifest.json
    #[arg(long, global = true, default_value = "pseudobound-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest singular value on a grid, level curves and pseudospectral abscissae
    Pseudospectrum(PseudoArgs),
    /// Upper bounds on transient growth
    Bound {
        #[command(subcommand)]
        kind: BoundKind,
    },
    /// Practical lower bound on the worst-case growth
    LowerBound(LowerArgs),
    /// Time-stepped solution norms
    Simulate(SimulateArgs),
    /// Simulation joined with upper bounds and a soundness verdict per row
    Compare(CompareArgs),
    /// List the built-in problems
    Presets,
    /// Write a problem as a JSON file
    Export {
        problem: String,
        path: PathBuf,
    },
}

#[derive(Args)]
pub struct PseudoArgs {
    pub problem: String,
    /// Level values
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2])]
    pub eps: Vec<f64>,
    /// Window re_min,re_max,im_min,im_max
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub window: Option<Vec<f64>>,
    /// Grid nodes nx,ny
    #[arg(long, value_delimiter = ',', default_values_t = [400, 400])]
    pub grid: Vec<usize>,
}

#[derive(Subcommand)]
pub enum BoundKind {
    /// ‖e^{tM}‖ for u' = Mu
    Ode(EpsArgs),
    /// ‖y(t)‖ for y^(n) = Σ A_j y^(j)
    Hode(EpsArgs),
    /// ‖y_n‖ for y_{n+1} = Σ A_j y_{n−j}
    Diffeq {
        #[command(flatten)]
        eps: EpsArgs,
        #[arg(long, value_enum, default_value_t = DiffeqForm::Auto)]
        form: DiffeqForm,
    },
    /// ‖Ψ(t)‖ for u' = Au + Bu(t − τ), or ‖u(t)‖ with --solution
    Dde(DdeArgs),
}

#[derive(Args, Clone)]
pub struct EpsArgs {
    pub problem: String,
    /// Explicit ε values; overrides --eps-mesh
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Exponent range k_lo,k_hi of the mesh ε = 10^(−k/2)
    #[arg(long, value_delimiter = ',', default_values_t = [2, 6])]
    pub eps_mesh: Vec<u32>,
    /// Final time (or step count for difference equations)
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Number of sample times
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiffeqForm {
    /// Majorant when only the first and last coefficients are nonzero
    Auto,
    Majorant,
    Blocks,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Split,
    Vertical,
    Nonsplit,
    NonsplitShifted,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    Statement,
    Proof,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExponentArg {
    Squared,
    Printed,
}

#[derive(Args, Clone)]
pub struct DdeArgs {
    pub problem: String,
    #[arg(long, value_enum, default_value_t = VariantArg::All)]
    pub variant: VariantArg,
    /// Contour height y0, or `auto` to scan a logarithmic mesh
    #[arg(long, default_value = "auto")]
    pub y0: String,
    /// Final time; defaults to 20τ
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    /// Reference time of the y0 scan; defaults to 5τ
    #[arg(long)]
    pub t_ref: Option<f64>,
    #[arg(long, value_enum, default_value_t = TailArg::Statement)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = ExponentArg::Squared)]
    pub exponent: ExponentArg,
    /// Collocation nodes for the characteristic-root estimate; defaults to
    /// 24, or 8 above dimension 50
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Bound the solution with the problem's history instead of Ψ
    #[arg(long)]
    pub solution: bool,
}

#[derive(Args)]
pub struct LowerArgs {
    pub problem: String,
    /// Real parts lo,hi scanned
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0])]
    pub x_range: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub nx: usize,
    /// Also report the upper bound's supremum over [0, T] (delay problems)
    #[arg(long)]
    pub bracket: bool,
    /// T for --bracket; defaults to 20τ
    #[arg(long)]
    pub t_end: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    pub problem: String,
    /// Step size; delay problems default to τ/m with m ≥ 200
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Record every k-th step
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Add real and imaginary parts of every component
    #[arg(long)]
    pub components: bool,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub dde: DdeArgs,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 6])]
    pub eps_mesh: Vec<u32>,
    #[arg(long, value_enum, default_value_t = DiffeqForm::Auto)]
    pub form: DiffeqForm,
    /// Step size of the simulation
    #[arg(long)]
    pub h: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pseudospectrum(args) => commands::pseudospectrum(&cli.out, &args),
        Command::Bound { kind } => commands::bound(&cli.out, &kind),
        Command::LowerBound(args) => commands::lower_bound(&cli.out, &args),
        Command::Simulate(args) => commands::simulate(&cli.out, &args),
        Command::Compare(args) => commands::compare(&cli.out, &args),
        Command::Presets => commands::presets(),
        Command::Export { problem, path } => commands::export(&problem, &path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
