use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use miracle::acyclicity::AcyclicityPenalty;
use miracle::baselines::BaselineKind;
use miracle::synth::{AmputeSpec, MarForm, Mechanism};
use miracle::trainer::{LossTerms, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "miracle",
    version,
    about = "Causally-aware refinement of missing-data imputation"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Sample a random linear SCM and optionally ampute it.
    Simulate(SimulateArgs),
    /// Remove values from a complete CSV.
    Ampute(AmputeArgs),
    /// Impute a CSV with a baseline, optionally refined.
    Impute(ImputeArgs),
    /// Refine a baseline imputation and keep the network checkpoint.
    Train(TrainArgs),
    /// Score an imputation against ground truth.
    Evaluate(EvaluateArgs),
    /// Run a benchmark grid described by a JSON suite file.
    Benchmark(BenchmarkArgs),
    /// Re-run a command from its resolved-config JSON.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AmputeFlags {
    #[arg(long, value_parser = parse_mechanism, default_value = "mar")]
    pub mechanism: Mechanism,
    /// Average missing rate per targeted feature.
    #[arg(long, default_value_t = 0.3)]
    pub rate: f64,
    /// Fraction of features targeted under MAR and MNAR.
    #[arg(long, default_value_t = 0.3)]
    pub target_fraction: f64,
    /// Use the sequential MAR form instead of disjoint cause sets.
    #[arg(long)]
    pub sequential: bool,
    /// Features never amputed (0-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub protect: Vec<usize>,
}

impl AmputeFlags {
    pub fn spec(&self) -> AmputeSpec {
        AmputeSpec {
            target_fraction: self.target_fraction,
            protected: self.protect.clone(),
            mar_form: if self.sequential {
                MarForm::Sequential
            } else {
                MarForm::CauseSets
            },
            ..AmputeSpec::new(self.mechanism, self.rate)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write an amputed copy.
    #[arg(long)]
    pub ampute: bool,
    #[command(flatten)]
    pub amputation: AmputeFlags,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AmputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub amputation: AmputeFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineFlags {
    #[arg(long, default_value = "mean", value_parser = ["mean", "knn", "chained"])]
    pub baseline: String,
    /// Neighbours for the kNN baseline.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Sweeps of the chained-equation baseline.
    #[arg(long, default_value_t = 10)]
    pub sweeps: usize,
    /// Ridge penalty of the chained-equation baseline.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

impl BaselineFlags {
    pub fn kind(&self) -> BaselineKind {
        match self.baseline.as_str() {
            "knn" => BaselineKind::Knn { k: self.k },
            "chained" => BaselineKind::Chained {
                sweeps: self.sweeps,
                lambda: self.lambda,
            },
            _ => BaselineKind::Mean,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 0.1)]
    pub beta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta2: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Epochs between input refreshes; 0 disables them.
    #[arg(long, default_value_t = 10)]
    pub refresh: usize,
    /// Capacity of the imputation queue.
    #[arg(long, default_value_t = 10)]
    pub queue: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    /// Hidden width (default: number of features).
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Rows per step (default: full batch).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Active loss terms, e.g. `l1,r1`.
    #[arg(long, value_delimiter = ',', default_value = "l1,r1,r2", value_parser = ["l1", "r1", "r2"])]
    pub terms: Vec<String>,
    #[arg(long)]
    pub polynomial_penalty: bool,
    /// Fit on the raw scale instead of z-scored features.
    #[arg(long)]
    pub no_standardize: bool,
}

impl ImputeArgs {
    pub fn refines(&self) -> bool {
        self.refine.as_deref() == Some("miracle")
    }
}

impl TrainFlags {
    pub fn config(&self, seed: u64) -> TrainConfig {
        let has = |t: &str| self.terms.iter().any(|x| x == t);
        TrainConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            lr: self.lr,
            max_epochs: self.epochs,
            refresh_interval: self.refresh,
            queue_capacity: self.queue,
            tolerance: self.tolerance,
            seed,
            hidden: self.hidden,
            depth: self.depth,
            terms: LossTerms {
                l1: has("l1"),
                r1: has("r1"),
                r2: has("r2"),
            },
            penalty: if self.polynomial_penalty {
                AcyclicityPenalty::Polynomial
            } else {
                AcyclicityPenalty::Exponential
            },
            threshold: self.threshold,
            batch_size: self.batch_size,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ImputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Extra token treated as missing besides empty cells and `NA`.
    #[arg(long)]
    pub missing_token: Option<String>,
    #[command(flatten)]
    pub baseline: BaselineFlags,
    /// Refine the baseline with the causal network (`--refine` or `--refine miracle`).
    #[arg(long, num_args = 0..=1, default_missing_value = "miracle", value_parser = ["miracle", "none"])]
    pub refine: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub missing_token: Option<String>,
    #[command(flatten)]
    pub baseline: BaselineFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Start from a saved checkpoint instead of a fresh network.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Complete ground-truth CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Imputed CSV.
    #[arg(long, alias = "input")]
    pub imputed: PathBuf,
    /// Mask CSV of the amputed data (1 observed, 0 amputed).
    #[arg(long)]
    pub mask: PathBuf,
    /// Complete test CSV for the downstream score.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Downstream target column (default: last).
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// A `resolved_config.json` written by an earlier run.
    pub config: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|e: miracle::Error| e.to_string())
}
