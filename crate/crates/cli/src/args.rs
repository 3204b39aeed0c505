use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "impulse-sde",
    version,
    about = "Simulate periodically kicked systems under small Brownian noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate x, X^eps and Z on one Brownian path and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the error scaling in eps; writes the report CSV.
    Convergence(ConvergenceArgs),
    /// Compare regularized kicks against the closed-form affine kick map.
    Kickmap(KickmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Pendulum,
    #[value(name = "affine_kick")]
    AffineKick,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum, default_value = "pendulum")]
    pub model: ModelName,

    /// Impulse offset: impulses at alpha, 1 + alpha, 2 + alpha, ...
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    /// Pendulum constant in x2' = -alpha_pend sin x1.
    #[arg(long = "alpha-pend", default_value_t = 1.0)]
    pub alpha_pend: f64,

    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,

    /// dt = 2^-m.
    #[arg(long = "dt-exp")]
    pub dt_exp: Option<u32>,

    /// Initial state, comma separated.
    #[arg(long, default_value = "0.5,0.5")]
    pub x0: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker cap for Monte Carlo runs; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Kick matrix A for the affine_kick model, row-major, comma separated.
    #[arg(long = "A", allow_hyphen_values = true)]
    pub kick_matrix: Option<String>,

    /// Kick offset c for the affine_kick model.
    #[arg(long = "c", allow_hyphen_values = true)]
    pub kick_offset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Noise scale in (0, 1).
    #[arg(long, default_value_t = 0.0625)]
    pub eps: f64,

    /// Permit --eps 0.
    #[arg(long = "allow-degenerate")]
    pub allow_degenerate: bool,

    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 1000 paths, dt = 2^-12.
    Paper,
    /// 200 paths, dt = 2^-10.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Lln,
    Clt,
    Both,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, value_enum, default_value = "paper")]
    pub preset: Preset,

    /// Number of sample paths (at least 2).
    #[arg(long)]
    pub paths: Option<usize>,

    /// Noise exponents i (eps = 2^-i): a range `a..b` (inclusive) or a comma list.
    #[arg(long = "eps-exps", default_value = "1..10")]
    pub eps_exps: String,

    #[arg(long, value_enum, default_value = "both")]
    pub mode: Mode,

    #[arg(long, default_value = "convergence.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KickmapArgs {
    /// Kick matrix A, row-major, comma separated.
    #[arg(long = "A", default_value = "0", allow_hyphen_values = true)]
    pub kick_matrix: String,

    /// Kick offset c.
    #[arg(long = "c", default_value = "1", allow_hyphen_values = true)]
    pub kick_offset: String,

    /// Starting state; defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<String>,

    /// Decreasing kick windows; substeps are round(1/delta).
    #[arg(long, default_value = "0.125,0.0625,0.03125,0.015625,0.0078125")]
    pub deltas: String,

    /// Write the table here (with a manifest) instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
