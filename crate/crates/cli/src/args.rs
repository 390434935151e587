use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use ustat_boot::bootstrap::{BootstrapMethod, Reduction, Scale};
use ustat_boot::KernelSpec;

#[derive(Debug, Parser)]
#[command(name = "ustat-boot", version, about = "U-statistics, bootstrap maxima, covariance thresholding and simultaneous tests")]
pub struct Cli {
    /// Write the run manifest here instead of the default location.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// U- and V-statistic of a data file.
    Ustat(UstatArgs),
    /// Bootstrap quantiles of a maximum-type statistic.
    Boot(BootArgs),
    /// Thresholded covariance matrix with the bootstrap threshold.
    Threshold(ThresholdArgs),
    /// Simultaneous test of a covariance or Kendall matrix.
    Test(TestArgs),
    /// One cell of the Gaussian approximation experiment.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ustat(_) => "ustat",
            Self::Boot(_) => "boot",
            Self::Threshold(_) => "threshold",
            Self::Test(_) => "test",
            Self::Simulate(_) => "simulate",
            Self::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Boot(a) => Some(a.seed),
            Self::Threshold(a) => Some(a.seed),
            Self::Test(a) => Some(a.seed),
            Self::Simulate(a) => Some(a.seed),
            Self::Ustat(_) | Self::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Mean,
    Cov,
    Kendall,
}

impl KernelArg {
    pub fn spec(self, p: usize) -> KernelSpec {
        match self {
            Self::Mean => KernelSpec::mean(p),
            Self::Cov => KernelSpec::covariance(p),
            Self::Kendall => KernelSpec::kendall(p),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Cov => "cov",
            Self::Kendall => "kendall",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct UstatArgs {
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub kernel: KernelArg,
    /// Write the p x p view of a matrix kernel as CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Eb,
    Rw,
    Rwflat,
    Mult,
}

impl MethodArg {
    pub fn method(self) -> BootstrapMethod {
        match self {
            Self::Eb => BootstrapMethod::Empirical,
            Self::Rw => BootstrapMethod::Reweighted,
            Self::Rwflat => BootstrapMethod::ReweightedFlat,
            Self::Mult => BootstrapMethod::Multiplier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatArg {
    Max,
    Absmax,
    Offabsmax,
}

impl StatArg {
    pub fn reduction(self) -> Reduction {
        match self {
            Self::Max => Reduction::Max,
            Self::Absmax => Reduction::AbsMax,
            Self::Offabsmax => Reduction::OffDiagAbsMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Raw,
    Rescaled,
}

impl ScaleArg {
    pub fn scale(self) -> Scale {
        match self {
            Self::Raw => Scale::Raw,
            Self::Rescaled => Scale::Rescaled,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BootArgs {
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub kernel: KernelArg,
    #[arg(long, value_enum, default_value = "mult")]
    pub method: MethodArg,
    /// Number of bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value = "max")]
    pub stat: StatArg,
    #[arg(long, value_enum, default_value = "raw")]
    pub scale: ScaleArg,
    /// Quantile levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.95")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write every reduced draw, one per line.
    #[arg(long)]
    pub dump_draws: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ThresholdArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long = "B", default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave the diagonal unthresholded.
    #[arg(long)]
    pub keep_diag: bool,
    /// Write the thresholded matrix as CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Cov,
    Kendall,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[arg(value_enum)]
    pub kind: TestKind,
    pub data: PathBuf,
    /// p x p null matrix as CSV.
    #[arg(long)]
    pub null: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "B", default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    M1,
    M2,
    Block,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepArg {
    D1,
    D2,
    D3,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "d1")]
    pub dep: DepArg,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Defaults to 40, or to L m for the block design.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Number of blocks of the block design.
    #[arg(long = "L")]
    pub blocks: Option<usize>,
    /// Block size of the block design.
    #[arg(long = "m")]
    pub block_size: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Draw the statistic from the reference law as well.
    #[arg(long)]
    pub sanity: bool,
    /// Also estimate test sizes at this level.
    #[arg(long)]
    pub size_alpha: Option<f64>,
    /// Bootstrap replicates per test in the size experiment.
    #[arg(long = "size-B", default_value_t = 500)]
    pub size_replicates: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
    /// Allow a replayed simulation to overwrite its output directory.
    #[arg(long)]
    pub force: bool,
}
