//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lagrograph", version, about = "Gradient graphs of Lagrangian potentials in 2D")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Nodes per side of the sampling grid (generate only; other commands
    /// take the grid of their input fields).
    #[arg(long, global = true, default_value_t = 129)]
    pub grid_n: usize,
    /// Half width of the square grid.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub half_width: f64,
    /// Radius of the disk mask.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub mask_radius: f64,
    /// Hölder exponent: the output exponent for analyze, the phase exponent
    /// for rotate and budget.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// Hessian bound: enforced by generate, used by rotate and budget.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Newton / Picard tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Newton / Picard iteration limit.
    #[arg(long, global = true, default_value_t = 50)]
    pub max_iter: usize,
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "lagrograph-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a closed-form potential with its derivatives and phase.
    Generate(GenerateArgs),
    /// Solve the special Lagrangian or Hamiltonian stationary equation.
    Solve {
        #[command(subcommand)]
        equation: SolveCommand,
    },
    /// Rotate the gradient graph of a potential.
    Rotate(RotateArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Run the regularity pipeline on a potential.
    Analyze(AnalyzeArgs),
    /// Print the rotation constants for a Hessian bound.
    Budget(BudgetArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Quadratic,
    #[value(name = "perturbed_quadratic")]
    PerturbedQuadratic,
    Saddle,
    #[value(name = "custom-coefficients")]
    CustomCoefficients,
}

impl Kind {
    pub fn registry_name(self) -> &'static str {
        match self {
            Kind::Quadratic => "quadratic",
            Kind::PerturbedQuadratic => "perturbed_quadratic",
            Kind::Saddle => "saddle",
            Kind::CustomCoefficients => "custom-coefficients",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub kind: Kind,
    /// Matrix M of the quadratic part as `xx,xy,yy`.
    #[arg(long, value_name = "XX,XY,YY")]
    pub m: Option<String>,
    /// Perturbation amplitude of perturbed_quadratic.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Polynomial term `a,b=c` meaning `c x1^a x2^b`; repeatable.
    #[arg(long = "coef", value_name = "A,B=C")]
    pub coefficients: Vec<String>,
}

/// Phase input: a field file or an affine function `c0 + c1 x1 + c2 x2`
/// sampled on the boundary grid.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PhaseInput {
    #[arg(long, value_name = "PATH")]
    pub theta: Option<PathBuf>,
    #[arg(long, value_name = "C0,C1,C2", allow_hyphen_values = true)]
    pub theta_affine: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub phase: PhaseInput,
    /// Potential whose ring values are the Dirichlet data.
    #[arg(long, value_name = "PATH")]
    pub boundary: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// F(D^2 u) = theta with Dirichlet data.
    Sl(SolveArgs),
    /// theta = F(D^2 u), Delta_g theta = 0 with Dirichlet data for both.
    Hs(SolveArgs),
}

#[derive(Debug, Args)]
pub struct RotateArgs {
    /// Potential to rotate.
    #[arg(long, value_name = "PATH")]
    pub u: PathBuf,
    /// Phase Hölder seminorm; measured on the mask when omitted.
    #[arg(long)]
    pub theta_holder: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_parser = ["identities", "transfer", "convergence"])]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    pub u: PathBuf,
    /// Hölder exponent of the phase (the output exponent is --alpha).
    #[arg(long, default_value_t = 0.5)]
    pub alpha_bar: f64,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Phase Hölder seminorm entering R'.
    #[arg(long, default_value_t = 0.0)]
    pub theta_holder: f64,
}
