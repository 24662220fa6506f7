use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mrcov", version, about = "Integrated covariance from noisy, non-synchronous tick data")]
pub struct Cli {
    /// Worker threads for `simulate`; other commands run on one thread.
    #[arg(long, env = "MRCOV_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw trade or quote file into a tick series.
    Clean(CleanArgs),
    /// Estimate the integrated covariance matrix of several tick series.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
    /// Confidence intervals for covariances, betas and correlations.
    Infer(InferArgs),
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Trade file with columns timestamp,price,size,exch,corr,cond.
    #[arg(long, conflicts_with = "quotes", required_unless_present = "quotes")]
    pub trades: Option<PathBuf>,

    /// Quote file with columns timestamp,bid,ask,bsize,asize,exch.
    #[arg(long)]
    pub quotes: Option<PathBuf>,

    /// Exchange code to keep.
    #[arg(long)]
    pub exchange: String,

    #[arg(long, default_value = "09:30:00")]
    pub open: String,

    #[arg(long, default_value = "16:00:00")]
    pub close: String,

    /// Comma-separated sale conditions treated as normal (an empty item allows blank conditions).
    #[arg(long, default_value = ",@,E,F")]
    pub allow_cond: String,

    /// Comma-separated rule order, e.g. exchange,session,zero_price,correction.
    #[arg(long)]
    pub rule_order: Option<String>,

    /// Drop quotes whose spread exceeds this multiple of the median spread.
    #[arg(long, default_value_t = 10.0)]
    pub spread_multiple: f64,

    /// Asset name; defaults to the input file stem.
    #[arg(long)]
    pub asset: Option<String>,

    /// Where to write the cleaned series (time_fraction,log_price).
    #[arg(short, long)]
    pub output: PathBuf,

    /// Where to write the cleaning report; standard output if omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Also report the noise ratio using a sparse grid of this many intervals.
    #[arg(long)]
    pub noise_ratio: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Rv,
    Mrc,
    MrcPsd,
    Hy,
    HyPreavg,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rv => "rv",
            EstimatorKind::Mrc => "mrc",
            EstimatorKind::MrcPsd => "mrc-psd",
            EstimatorKind::Hy => "hy",
            EstimatorKind::HyPreavg => "hy-preavg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Cov,
    Beta,
    Corr,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Tick series files (time_fraction,log_price); repeat for each asset.
    #[arg(short, long = "input", required = true)]
    pub inputs: Vec<PathBuf>,

    /// Synchronisation: `refresh` or `calendar:N`.
    #[arg(long, default_value = "refresh")]
    pub sync: String,

    /// Window constant, or `auto` for the iterative optimum.
    #[arg(long, default_value = "1")]
    pub theta: String,

    /// Explicit pre-averaging window, overriding the theta rule.
    #[arg(long)]
    pub kn: Option<usize>,

    /// Weight function: `min`, `power:A,B` or `sine:C`.
    #[arg(long, default_value = "min")]
    pub weight: String,

    /// Write the report here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferenceArgs {
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Three auxiliary weights for the variance estimate, e.g. `sine:1;sine:3;sine:6`.
    #[arg(long)]
    pub triple: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[arg(long, value_enum, default_value = "mrc")]
    pub estimator: EstimatorKind,

    /// Window exponent offset for mrc-psd (default 0.1); must be 0 for mrc.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Add confidence intervals (mrc only).
    #[arg(long)]
    pub infer: bool,

    #[command(flatten)]
    pub inference: InferenceArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Only `mrc` supports inference.
    #[arg(long, value_enum, default_value = "mrc")]
    pub estimator: EstimatorKind,

    /// Statistics to report; all three if omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub stat: Vec<Stat>,

    #[command(flatten)]
    pub inference: InferenceArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario `gamma2=G,lambda=L1/L2` or `gamma2=G,lambda=full`; repeatable.
    /// Defaults to gamma2 in {0, 0.001, 0.01} crossed with lambda1 in {3, 5, 10, 30, 60}, lambda2 = 2 lambda1.
    #[arg(long)]
    pub scenario: Vec<String>,

    /// Comma-separated estimators: rc:N, mrc, mrc-psd, hy-preavg, hy.
    #[arg(long, default_value = "rc:26,rc:390,mrc,mrc-psd,hy-preavg")]
    pub estimators: String,

    #[arg(long, default_value_t = 250)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,

    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,

    #[arg(long, default_value = "min")]
    pub weight: String,

    /// Number of grid steps in the simulated session.
    #[arg(long, default_value_t = 23_400)]
    pub grid_n: usize,

    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
