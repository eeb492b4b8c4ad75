use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Seed used when neither `--seed` nor `KSTAB_SEED` is given.
pub const DEFAULT_SEED: u64 = 0x5EED;
pub const DEFAULT_RESTARTS: usize = 16;
/// Largest grid solved by enumeration unless `--enum-limit` says otherwise.
pub const DEFAULT_ENUM_LIMIT: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "kstab", version, about = "Sign-restricted (∞,1) norms and BIBO stability of kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in kernel families and their parameters.
    Zoo(Common),
    /// Estimate the (∞,1) norm of one kernel on one grid.
    Norm(Common),
    /// 1-norm of a single impulse response read from a test-function file.
    Single(WithInput),
    /// Boost a test function to a sign pattern and emit the step trace.
    Boost(WithInput),
    /// Norms of truncated kernels over growing horizons, with a growth verdict.
    Stability(Common),
}

#[derive(Debug, Args)]
pub struct WithInput {
    #[command(flatten)]
    pub common: Common,
    /// Test-function file: JSON grid header line, then one value per line.
    #[arg(value_name = "FUNCTION.csv")]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Kernel spec file (key=value tokens or JSON).
    #[arg(long, value_name = "PATH", conflicts_with = "matrix")]
    pub spec: Option<PathBuf>,
    /// Inline symmetric matrix, e.g. "[[2,1],[1,2]]".
    #[arg(long, value_name = "JSON")]
    pub matrix: Option<String>,
    /// Horizon T (continuous) or node count n (discrete).
    #[arg(long, value_name = "F", conflicts_with = "horizons")]
    pub horizon: Option<f64>,
    /// Comma-separated increasing horizons for `stability`.
    #[arg(long, value_name = "CSVLIST", value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Grid step h for continuous kernels.
    #[arg(long, value_name = "F")]
    pub step: Option<f64>,
    #[arg(long, value_name = "N")]
    pub restarts: Option<usize>,
    /// PRNG seed; the KSTAB_SEED environment variable takes precedence.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Objective tolerance for sign rounding (default: 1e-3 × entrywise bound).
    #[arg(long, value_name = "F")]
    pub eps: Option<f64>,
    /// Largest node count solved by exhaustive enumeration (at most 25).
    #[arg(long = "enum-limit", value_name = "N")]
    pub enum_limit: Option<usize>,
    #[arg(long = "out-json", value_name = "PATH")]
    pub out_json: Option<PathBuf>,
    #[arg(long = "out-csv", value_name = "PATH")]
    pub out_csv: Option<PathBuf>,
    /// Suppress stdout.
    #[arg(long)]
    pub quiet: bool,
}
