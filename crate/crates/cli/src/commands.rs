use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use miracle::baselines::BaselineKind;
use miracle::data::{load_csv, load_mask_csv, merge_imputation, write_csv, write_mask_csv, write_matrix_csv};
use miracle::eval::{congeniality, imputation_rmse, prediction_rmse, run_benchmark, write_benchmark, SuiteConfig};
use miracle::network::NetworkParams;
use miracle::synth::{ampute_with_plan, generate_scm, sample_scm, AmputePlan, AmputeSpec, ScmSpec};
use miracle::trainer::{train, train_from, TrainOutput};
use miracle::{Dataset, Error, ImputedMatrix, Result, Standardizer, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::{
    AmputeArgs, BenchmarkArgs, Command, EvaluateArgs, ImputeArgs, RerunArgs, SimulateArgs, TrainArgs, TrainFlags,
};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// Everything needed to repeat a run, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resolved {
    pub version: String,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ampute: Option<AmputeSpec>,
    /// Benchmark suites are embedded so a rerun does not depend on the original file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
}

impl Resolved {
    fn new(command: Command) -> Self {
        Resolved {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            baseline: None,
            train: None,
            ampute: None,
            suite: None,
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(RESOLVED_CONFIG), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Ampute(a) => ampute_cmd(a),
        Command::Impute(a) => impute(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => {
            let suite = SuiteConfig::load(&a.config)?;
            benchmark(a, suite)
        }
        Command::Rerun(a) => rerun(a),
    }
}

fn output_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationSidecar<'a> {
    scm: &'a ScmSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    ampute: Option<&'a AmputePlan>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.d < 2 {
        return Err(Error::InvalidArgument(format!(
            "--d must be at least 2, got {}",
            args.d
        )));
    }
    if args.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".to_string()));
    }
    let dir = output_dir(&args.output)?;
    let scm = generate_scm(args.d, args.seed)?;
    let data = sample_scm(&scm, args.n, args.seed)?;
    write_csv(dir.join("values.csv"), &data)?;
    let mut resolved = Resolved::new(Command::Simulate(args.clone()));
    let plan = if args.ampute {
        let mut protected = args.amputation.protect.clone();
        protected.extend(scm.roots());
        protected.sort_unstable();
        protected.dedup();
        let spec = AmputeSpec {
            protected,
            ..args.amputation.spec()
        };
        let (amputed, plan) = ampute_with_plan(&data, &spec, args.seed)?;
        write_csv(dir.join("amputed.csv"), &amputed)?;
        write_mask_csv(dir.join("mask.csv"), &amputed)?;
        resolved.ampute = Some(spec);
        Some(plan)
    } else {
        write_mask_csv(dir.join("mask.csv"), &data)?;
        None
    };
    write_json(
        dir.join("spec.json"),
        &SimulationSidecar {
            scm: &scm,
            ampute: plan.as_ref(),
        },
    )?;
    resolved.write(&dir)
}

fn ampute_cmd(args: AmputeArgs) -> Result<()> {
    let data = load_csv(&args.input, None)?;
    if !data.is_complete() {
        return Err(Error::InvalidArgument(format!(
            "{} already has {} missing cells; amputation needs complete data",
            args.input.display(),
            data.n_missing()
        )));
    }
    let dir = output_dir(&args.output)?;
    let spec = args.amputation.spec();
    let (amputed, plan) = ampute_with_plan(&data, &spec, args.seed)?;
    write_csv(dir.join("amputed.csv"), &amputed)?;
    write_mask_csv(dir.join("mask.csv"), &amputed)?;
    write_json(dir.join("plan.json"), &plan)?;
    let mut resolved = Resolved::new(Command::Ampute(args));
    resolved.ampute = Some(spec);
    resolved.write(&dir)
}

/// Trains on z-scored data (unless disabled) and maps the result back to the input scale.
fn refine(
    data: &Dataset,
    seed: &ImputedMatrix,
    flags: &TrainFlags,
    cfg: &TrainConfig,
    resume: Option<NetworkParams>,
) -> Result<(ImputedMatrix, TrainOutput)> {
    let scaler = if flags.no_standardize {
        None
    } else {
        Some(Standardizer::fit(data)?)
    };
    let (work, work_seed) = match &scaler {
        Some(s) => (
            s.transform(data)?,
            ImputedMatrix::new(s.transform_matrix(&seed.values)?, seed.provenance.clone()),
        ),
        None => (data.clone(), seed.clone()),
    };
    let out = match resume {
        Some(params) => train_from(&work, &work_seed, params, cfg)?,
        None => train(&work, &work_seed, cfg)?,
    };
    let back = match &scaler {
        Some(s) => s.inverse_transform_matrix(&out.imputed.values)?,
        None => out.imputed.values.clone(),
    };
    let merged = merge_imputation(data, &back)?.with_provenance(format!("{}+miracle", seed.provenance));
    Ok((merged, out))
}

fn write_training(dir: &Path, out: &TrainOutput) -> Result<()> {
    out.adjacency.write_csv(dir.join("adjacency.csv"))?;
    let mut log = fs::File::create(dir.join("train_log.jsonl"))?;
    for entry in &out.log {
        writeln!(log, "{}", serde_json::to_string(entry)?)?;
    }
    out.params.save_json(dir.join("params.json"))
}

fn impute(args: ImputeArgs) -> Result<()> {
    let data = load_csv(&args.input, args.missing_token.as_deref())?;
    let baseline = args.baseline.kind();
    let cfg = args.train.config(args.seed);
    cfg.validate()?;
    let dir = output_dir(&args.output)?;
    let seed = baseline.impute(&data)?;
    let mut resolved = Resolved::new(Command::Impute(args.clone()));
    resolved.baseline = Some(baseline);
    let imputed = if args.refines() {
        let (imputed, out) = refine(&data, &seed, &args.train, &cfg, None)?;
        write_training(&dir, &out)?;
        resolved.train = Some(cfg);
        imputed
    } else {
        seed
    };
    write_matrix_csv(dir.join("imputed.csv"), data.feature_names(), &imputed.values)?;
    resolved.write(&dir)
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let data = load_csv(&args.input, args.missing_token.as_deref())?;
    let baseline = args.baseline.kind();
    let cfg = args.train.config(args.seed);
    cfg.validate()?;
    let resume = args.resume.as_ref().map(NetworkParams::load_json).transpose()?;
    let dir = output_dir(&args.output)?;
    let seed = baseline.impute(&data)?;
    let (imputed, out) = refine(&data, &seed, &args.train, &cfg, resume)?;
    write_training(&dir, &out)?;
    write_matrix_csv(dir.join("imputed.csv"), data.feature_names(), &imputed.values)?;
    let mut resolved = Resolved::new(Command::Train(args));
    resolved.baseline = Some(baseline);
    resolved.train = Some(cfg);
    resolved.write(&dir)
}

#[derive(Debug, Serialize)]
struct Metrics {
    n_missing: usize,
    target: usize,
    imputation_rmse: f64,
    congeniality: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction_rmse: Option<f64>,
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let truth = load_csv(&args.truth, None)?;
    let imputed = load_csv(&args.imputed, None)?;
    let mask = load_mask_csv(&args.mask)?;
    for (what, ds) in [("truth", &truth), ("imputed", &imputed)] {
        if !ds.is_complete() {
            return Err(Error::InvalidArgument(format!("{what} CSV has missing cells")));
        }
    }
    let target = args.target.unwrap_or(truth.n_features() - 1);
    if target >= truth.n_features() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} features",
            truth.n_features()
        )));
    }
    let imp = ImputedMatrix::new(imputed.values().clone(), "input");
    let prediction = match &args.test {
        Some(path) => Some(prediction_rmse(
            &imp.values,
            &load_csv(path, None)?,
            target,
            args.lambda,
        )?),
        None => None,
    };
    let metrics = Metrics {
        n_missing: mask.iter().filter(|m| !**m).count(),
        target,
        imputation_rmse: imputation_rmse(&truth, &imp, &mask)?,
        congeniality: congeniality(&truth, &imp, target, args.lambda)?,
        prediction_rmse: prediction,
    };
    let dir = output_dir(&args.output)?;
    write_json(dir.join("metrics.json"), &metrics)?;
    Resolved::new(Command::Evaluate(args)).write(&dir)
}

fn benchmark(args: BenchmarkArgs, suite: SuiteConfig) -> Result<()> {
    let results = run_benchmark(&suite, args.jobs)?;
    let dir = output_dir(&args.output)?;
    let rows = write_benchmark(&dir, &results)?;
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    log::info!(
        "{} cells, {} aggregate rows, {failed} failed",
        results.len(),
        rows.len()
    );
    let mut resolved = Resolved::new(Command::Benchmark(args));
    resolved.suite = Some(suite);
    resolved.write(&dir)
}

fn rerun(args: RerunArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let resolved: Resolved = serde_json::from_str(&text).map_err(|e| Error::Config {
        pointer: String::new(),
        message: format!("{}: {e}", args.config.display()),
    })?;
    let mut command = resolved.command;
    if let Some(out) = args.output {
        match &mut command {
            Command::Simulate(a) => a.output = out,
            Command::Ampute(a) => a.output = out,
            Command::Impute(a) => a.output = out,
            Command::Train(a) => a.output = out,
            Command::Evaluate(a) => a.output = out,
            Command::Benchmark(a) => a.output = out,
            Command::Rerun(_) => {}
        }
    }
    match command {
        Command::Rerun(_) => Err(Error::InvalidArgument(
            "a resolved config cannot name rerun".to_string(),
        )),
        Command::Benchmark(a) => match resolved.suite {
            Some(suite) => {
                suite.validate()?;
                benchmark(a, suite)
            }
            None => run(Command::Benchmark(a)),
        },
        other => run(other),
    }
}
