use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsnm::bench::{CorpusFormat, Family, KlOrientation, KnotRule};
use lsnm::independence::HsicMethod;
use lsnm::inference::{Estimator, Method};
use lsnm::mlp::Activation;

#[derive(Debug, Parser)]
#[command(name = "lsnm", version, about = "Location-scale noise models for cause-effect inference")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 1 gives byte-identical reports across runs, 0 uses every CPU.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one conditional model y | x and write its summary.
    Fit(FitArgs),
    /// Decide the causal direction of one pair.
    Infer(InferArgs),
    /// Write a synthetic labelled corpus as two-column files.
    Simulate(SimulateArgs),
    /// Run a decision method over a corpus and write a JSON report.
    Benchmark(BenchmarkArgs),
    /// Compare the concave estimator with IFGLS on the sinusoid benchmark.
    EstimatorBench(EstimatorBenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Relu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Relu => Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HsicArg {
    Gamma,
    Permutation,
}

impl From<HsicArg> for HsicMethod {
    fn from(a: HsicArg) -> Self {
        match a {
            HsicArg::Gamma => HsicMethod::Gamma,
            HsicArg::Permutation => HsicMethod::Permutation,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KnotRuleArg {
    Sqrt,
    Tenth,
}

impl From<KnotRuleArg> for KnotRule {
    fn from(a: KnotRuleArg) -> Self {
        match a {
            KnotRuleArg::Sqrt => KnotRule::Sqrt,
            KnotRuleArg::Tenth => KnotRule::Tenth,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    TrueToEstimate,
    EstimateToTrue,
}

impl From<OrientationArg> for KlOrientation {
    fn from(a: OrientationArg) -> Self {
        match a {
            OrientationArg::TrueToEstimate => KlOrientation::TrueToEstimate,
            OrientationArg::EstimateToTrue => KlOrientation::EstimateToTrue,
        }
    }
}

/// Estimator settings; anything left out keeps the library default.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Spline polynomial degree [default: 5].
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of spline knots [default: 25].
    #[arg(long)]
    pub knots: Option<usize>,
    /// Ridge prior on the concave estimator weights [default: 1e-6].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Outer iterations of the concave estimator [default: 100].
    #[arg(long)]
    pub outer_iters: Option<usize>,
    /// Log-likelihood change that stops the concave estimator [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Hidden units of the network [default: 100].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Hidden activation [default: tanh].
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// Adam steps [default: 5000].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial learning rate [default: 1e-2].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Final learning rate of the cosine schedule [default: 1e-6].
    #[arg(long)]
    pub lr_final: Option<f64>,
}

/// Independence test settings, only meaningful with `--method loci_h`.
#[derive(Debug, Clone, Default, Args)]
pub struct HsicArgs {
    /// Null distribution of the HSIC test [default: gamma].
    #[arg(long, value_enum)]
    pub hsic_method: Option<HsicArg>,
    /// Permutations for the permutation test [default: 500].
    #[arg(long)]
    pub n_perms: Option<usize>,
    /// Fit on the first half of the sample and test on the second.
    #[arg(long)]
    pub sample_split: bool,
}

impl HsicArgs {
    pub fn any_set(&self) -> bool {
        self.hsic_method.is_some() || self.n_perms.is_some() || self.sample_split
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Two-column numeric file (comma or whitespace separated).
    #[arg(long, short)]
    pub input: PathBuf,
    /// One of spline_concave, mlp, ifgls, anm_spline, anm_mlp.
    #[arg(long, default_value = "spline_concave")]
    pub estimator: Estimator,
    /// Fit x | y instead of y | x.
    #[arg(long)]
    pub reverse: bool,
    /// Write the JSON summary here as well as to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Two-column numeric file (comma or whitespace separated).
    #[arg(long, short)]
    pub input: PathBuf,
    /// loci_m (likelihood) or loci_h (independence).
    #[arg(long, default_value = "loci_m")]
    pub method: Method,
    /// One of spline_concave, mlp, ifgls, anm_spline, anm_mlp.
    #[arg(long, default_value = "spline_concave")]
    pub estimator: Estimator,
    /// Write the verdict JSON here as well as to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub hsic: HsicArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// an, an_s, ls, ls_s, mnu or sinusoid.
    #[arg(long)]
    pub family: Family,
    #[arg(long, default_value_t = 100)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,
    /// Directory for the pair files and labels.csv; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Keep every pair in the x → y orientation.
    #[arg(long)]
    pub no_randomize: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Corpus directory.
    #[arg(long, env = "LSNM_DATA_DIR")]
    pub corpus: PathBuf,
    /// two_column_csv_dir or tuebingen_meta.
    #[arg(long, default_value = "two_column_csv_dir")]
    pub format: CorpusFormat,
    /// loci_m (likelihood) or loci_h (independence).
    #[arg(long, default_value = "loci_m")]
    pub method: Method,
    /// One of spline_concave, mlp, ifgls, anm_spline, anm_mlp.
    #[arg(long, default_value = "spline_concave")]
    pub estimator: Estimator,
    /// JSON report path.
    #[arg(long, short, default_value = "report.json")]
    pub output: PathBuf,
    /// Also write the decision-rate curve as CSV.
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
    /// Report accuracy weighted by the corpus metadata weights too.
    #[arg(long)]
    pub weighted_accuracy: bool,
    #[command(flatten)]
    pub hsic: HsicArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EstimatorBenchArgs {
    /// Sample sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10_000])]
    pub sizes: Vec<usize>,
    /// Knot-count rules to sweep.
    #[arg(long, value_delimiter = ',', value_enum, default_values = ["sqrt", "tenth"])]
    pub knot_rules: Vec<KnotRuleArg>,
    /// Repetitions per cell.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Evaluation grid size.
    #[arg(long, default_value_t = 10_000)]
    pub n_grid: usize,
    /// Spline polynomial degree.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "true-to-estimate")]
    pub kl_orientation: OrientationArg,
    /// JSON report path.
    #[arg(long, short, default_value = "estimator_bench.json")]
    pub output: PathBuf,
}
