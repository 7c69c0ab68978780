use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "twistlab", version, about = "Experiments on twist maps of the annulus", args_override_self = true)]
pub struct Cli {
    /// JSON or TOML file with flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (also capped by TWISTLAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the map from a point.
    Orbit(OrbitArgs),
    /// Minimize the periodic action for rotation number p/q.
    Minimize(MinimizeArgs),
    /// Residues along continued-fraction convergents and the tail verdict.
    Greene(GreeneArgs),
    /// Finite-depth Green slopes at a point or along a minimizing orbit.
    GreenBundles(GreenArgs),
    /// Finite-time Lyapunov exponent of an orbit.
    Lyapunov(LyapunovArgs),
    /// Paratangent spreads and Green gaps of a point cloud.
    Regularity(RegularityArgs),
    /// Decay rate of the distance from an orbit to a set.
    Rate(RateArgs),
    /// Residues over a grid of parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Clone)]
pub struct MapArgs {
    /// Map family: standard or integrable.
    #[arg(long, default_value = "standard")]
    pub map: String,
    /// Nonlinearity parameter of the standard family.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct OutArgs {
    /// Primary output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Secondary CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct RestartArgs {
    /// Restarts per minimization (default max(q, 8)).
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Seed for the restart phases; 0 keeps the unshifted phases.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    /// Number of iterates (negative iterates backward).
    #[arg(long, allow_hyphen_values = true, default_value_t = 100)]
    pub n: i64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub p: i64,
    #[arg(long)]
    pub q: usize,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GreeneArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Rotation target: golden, a float, or continued-fraction terms such as [0;2,1,1].
    #[arg(long, default_value = "golden")]
    pub omega: String,
    /// Number of convergents.
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    #[arg(long, default_value_t = 1.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value_t = 3)]
    pub tail_window: usize,
    #[arg(long, default_value_t = 233)]
    pub max_q: usize,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Base point (with --r); alternatively give --p and --q.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<i64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RegularityArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Minimizing orbits forming the cloud, e.g. 34/55,55/89.
    #[arg(long)]
    pub orbits: Option<String>,
    /// Orbit-sample cloud from this start point (with --r and --n).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Green depth for the gap profile.
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    /// Secant scales, comma separated (default 0.1, 0.05, ..., 0.00625).
    #[arg(long)]
    pub deltas: Option<String>,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Minimizing orbits forming the target set, e.g. 55/89.
    #[arg(long)]
    pub orbits: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Probed growth rates, comma separated.
    #[arg(long, default_value = "0.1,0.3,0.5")]
    pub epsilons: String,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "standard")]
    pub map: String,
    /// Parameter grid, comma separated; may be empty.
    #[arg(long, default_value = "")]
    pub ks: String,
    /// Single rotation number per cell (with --q) instead of convergents.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<i64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value = "golden")]
    pub omega: String,
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    #[arg(long, default_value_t = 233)]
    pub max_q: usize,
    #[command(flatten)]
    pub restart: RestartArgs,
    #[command(flatten)]
    pub out: OutArgs,
}
