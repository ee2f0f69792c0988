#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tlasso",
    version,
    about = "Generalized and transductive LASSO / Dantzig estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator at one tuning level.
    Fit(FitArgs),
    /// LASSO or Dantzig solutions over a geometric grid.
    Path(PathArgs),
    /// Run the benchmark simulation.
    Simulate(SimulateArgs),
    /// Monte Carlo checks of the concentration and oracle bounds.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Denoise,
    Transductive,
    Estimate,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lasso,
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Unit,
    Xi,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Labeled design, one column per covariate.
    #[arg(long)]
    pub x: PathBuf,
    /// Response, a single column.
    #[arg(long)]
    pub y: PathBuf,
    /// Unlabeled design with the same columns as X.
    #[arg(long, alias = "z")]
    pub unlabeled: Option<PathBuf>,
    /// Target matrix A for the custom objective.
    #[arg(long)]
    pub custom_a: Option<PathBuf>,
    /// Default denoise; the two-step fit implies transductive.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long, value_enum, default_value = "lasso")]
    pub method: MethodArg,
    /// Rescale columns so that X_j'X_j = n before fitting.
    #[arg(long, value_enum, default_value = "off")]
    pub normalize: Switch,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Second-stage level; switches to the two-step transductive fit.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda2: Option<f64>,
    /// First-stage method of the two-step fit.
    #[arg(long, value_enum, default_value = "lasso")]
    pub stage1: MethodArg,
    /// Second-stage level is multiplier * lambda2 (default 1 for the benchmark form).
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    /// Coordinate weights of the second stage.
    #[arg(long, value_enum, default_value = "unit")]
    pub weighting: WeightingArg,
    #[arg(long, default_value = "estimate.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// base:kmin:kmax, lambdas base^k for k from kmax down to kmin.
    #[arg(long, default_value = "1.2:-50:30", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value = "path.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of table1-row1 .. table1-row6, n20m120.
    #[arg(long)]
    pub preset: Option<String>,
    /// Flat key = value file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// sparse, very-sparse, or a comma-separated vector.
    #[arg(long, allow_hyphen_values = true)]
    pub beta_star: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub normalize: Option<Switch>,
    /// base:kmin:kmax
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "sim-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub claim: Claim,
}

#[derive(Debug, Args, Clone)]
pub struct CommonVerify {
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Scenario preset; n20p8 is an alias for table1-row4.
    #[arg(long, default_value = "table1-row4")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cone samples for restricted constants.
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Coverage CSV (default coverage-<claim>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    X,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Stated,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremObjectiveArg {
    Denoise,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GramArg {
    Identity,
    Gram,
}

#[derive(Debug, Subcommand)]
pub enum Claim {
    /// Noise concentration for A'A (X'X)^+ X' e.
    Lemma1 {
        #[command(flatten)]
        common: CommonVerify,
        /// A = X or A = sqrt(n) I.
        #[arg(long, value_enum, default_value = "x")]
        a: TargetArg,
        #[arg(long, value_enum, default_value = "stated")]
        form: FormArg,
    },
    /// Generalized LASSO oracle bounds.
    Theorem1 {
        #[command(flatten)]
        common: CommonVerify,
        #[arg(long, value_enum, default_value = "denoise")]
        objective: TheoremObjectiveArg,
        #[arg(long, default_value_t = 1.0)]
        weight_exponent: f64,
    },
    /// Generalized Dantzig oracle bounds.
    Theorem2 {
        #[command(flatten)]
        common: CommonVerify,
        #[arg(long, value_enum, default_value = "denoise")]
        objective: TheoremObjectiveArg,
        #[arg(long, default_value_t = 1.0)]
        weight_exponent: f64,
    },
    /// Two-step transductive bounds on a replicated design.
    Theorem3 {
        #[command(flatten)]
        common: CommonVerify,
        /// Number of blocks in the unlabeled design.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Perturbation of the replicated blocks.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        weight_exponent: f64,
    },
    /// Gram deviation of a random labeled subsample.
    Prop4 {
        #[command(flatten)]
        common: CommonVerify,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Bound on squared entries; entries are uniform on [-1, 1].
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 4)]
        p: usize,
        /// Labeled sample size; the population has k * n rows.
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Restricted eigenvalue constant of a matrix over a cone.
    Assumption {
        #[command(flatten)]
        common: CommonVerify,
        /// n I, or the Gram matrix of the preset's normalized design.
        #[arg(long, value_enum, default_value = "gram")]
        m: GramArg,
        /// Cone aperture.
        #[arg(long, default_value_t = 3.0)]
        x: f64,
        /// Comma-separated support (default: support of the preset's beta).
        #[arg(long)]
        support: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
                || e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let msg = e.to_string();
            let reason = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("tip:"))
                .collect::<Vec<_>>()
                .join(" ");
            return CliError::Validation(reason.trim_start_matches("error: ").to_string()).report();
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Path(a) => commands::path(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
