use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "splitgap", version, about = "Ground-state splittings of long-range quantum chains")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Cache directory (falls back to SPLITGAP_CACHE; no caching when neither is set).
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Ignore the cache entirely.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Write JSON lines here instead of stdout.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Worker threads for sweeps and verification.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact diagonalization of the spin chain in both parity sectors.
    Ed(PointArgs),
    /// Splitting of the toy model by secular equation, time-domain integral or dense oracle.
    Toy(PointArgs),
    /// Semiclassical splitting of the rotor chain.
    Rotor(PointArgs),
    /// Minimizes the reduced instanton action of the spin chain.
    Instanton(PointArgs),
    /// Compares the discretized kernel spectrum with its closed form.
    Hessian(PointArgs),
    /// Fits stretched-exponential scaling to records read from stdin or --input.
    Fit(FitArgs),
    /// Runs one command over the cartesian product of axes.
    Sweep(SweepArgs),
    /// Runs the invariant and acceptance checks.
    Verify(VerifyArgs),
}

/// Model and solver flags shared by the point commands. Everything is
/// optional so that sweeps and config files can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct PointArgs {
    #[arg(long = "L", visible_alias = "l", value_name = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// all-to-all, power-law or custom:f0,f1,...
    #[arg(long)]
    pub coupling: Option<String>,
    /// Inverse temperature or "inf".
    #[arg(long)]
    pub beta: Option<String>,
    /// Rotor semiclassical parameter.
    #[arg(long)]
    pub g: Option<f64>,
    /// Toy operator: sigma-x, sigma-xx, mixed:p/q[:unit].
    #[arg(long)]
    pub choice: Option<String>,
    /// Mixed-operator coefficient p/q; implies --choice mixed.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Mixed-operator normalization: paper or unit.
    #[arg(long)]
    pub norm: Option<String>,
    /// Toy route: secular, time-domain, dense or all.
    #[arg(long)]
    pub route: Option<String>,
    /// ED method: lanczos or dense.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key = value file; explicit flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// JSON-lines file of records (default stdin).
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// pure-power, power-log or auto.
    #[arg(long, default_value = "auto")]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// NAME=v1,v2,... or NAME=start:stop:step (stop inclusive). Repeatable.
    #[arg(long = "axis", value_name = "NAME=VALUES")]
    pub axes: Vec<String>,
    /// Point command to run at every grid point.
    #[arg(long = "cmd", default_value = "ed")]
    pub cmd: String,
    /// Named sweep; replaces --axis and --cmd.
    #[arg(long)]
    pub preset: Option<String>,
    /// Refuse sweeps larger than this.
    #[arg(long, default_value_t = 10_000)]
    pub max_points: usize,
    #[command(flatten)]
    pub base: PointArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// ed, chain-trend, instanton, appendix-d, rotor, toy, kernel, table or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Inverse temperature for the finite-beta determinant check.
    #[arg(long, default_value_t = 50.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub nmax: usize,
}
