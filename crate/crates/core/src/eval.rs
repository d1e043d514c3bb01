//! Metrics, the end-to-end benchmark pipeline and the experiment grids built on it.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acyclicity::h_of;
use crate::baselines::BaselineKind;
use crate::data::{split_train_test, Dataset, ImputedMatrix, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::{drop_column, fit_ridge, RidgeModel};
use crate::network::AdjacencyEstimate;
use crate::synth::{
    ampute_with_plan, edge_recovery_score, generate_scm, sample_scm, AmputeSpec, MarForm, Mechanism, ScmSpec,
};
use crate::trainer::{train, LossTerms, TrainConfig};
use crate::util::{mean, sample_std};

/// Squared error of one imputed cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub row: usize,
    pub col: usize,
    pub error: f64,
}

fn check_same_shape(truth: &Dataset, imputed: &ImputedMatrix, mask: &Array2<bool>) -> Result<()> {
    let dim = truth.values().dim();
    for found in [imputed.values.dim(), mask.dim()] {
        if found != dim {
            return Err(Error::ShapeMismatch { expected: dim, found });
        }
    }
    if !truth.is_complete() {
        return Err(Error::InvalidArgument("ground truth must be complete".to_string()));
    }
    Ok(())
}

/// Squared errors on the cells where `mask` is false.
pub fn cell_errors(truth: &Dataset, imputed: &ImputedMatrix, mask: &Array2<bool>) -> Result<Vec<CellError>> {
    check_same_shape(truth, imputed, mask)?;
    Ok(mask
        .indexed_iter()
        .filter(|(_, m)| !**m)
        .map(|((row, col), _)| CellError {
            row,
            col,
            error: (imputed.values[[row, col]] - truth.values()[[row, col]]).powi(2),
        })
        .collect())
}

/// RMSE over the amputed cells only.
pub fn imputation_rmse(truth: &Dataset, imputed: &ImputedMatrix, mask: &Array2<bool>) -> Result<f64> {
    let errors = cell_errors(truth, imputed, mask)?;
    if errors.is_empty() {
        return Err(Error::NoMissingCells);
    }
    Ok((errors.iter().map(|e| e.error).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Ridge model predicting column `target` from all other columns.
pub fn fit_target_model(x: &Array2<f64>, target: usize, lambda: f64) -> Result<RidgeModel> {
    if target >= x.ncols() {
        return Err(Error::InvalidArgument(format!("target column {target} out of range")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be > 0, got {lambda}"
        )));
    }
    let features = drop_column(x.view(), target);
    fit_ridge(features.view(), x.column(target), lambda)
}

/// Downstream error: fit on the imputed training matrix, score on the test split.
pub fn prediction_rmse(imputed_train: &Array2<f64>, test: &Dataset, target: usize, lambda: f64) -> Result<f64> {
    if imputed_train.ncols() != test.n_features() {
        return Err(Error::ShapeMismatch {
            expected: (imputed_train.nrows(), test.n_features()),
            found: imputed_train.dim(),
        });
    }
    if test.mask().column(target).iter().any(|m| !*m) {
        return Err(Error::InvalidArgument(format!(
            "target column {target} has missing values in the test split"
        )));
    }
    if test.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let model = fit_target_model(imputed_train, target, lambda)?;
    let features = drop_column(test.values().view(), target);
    let pred = model.predict(features.view());
    let mse = pred
        .iter()
        .zip(test.values().column(target))
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / test.n_rows() as f64;
    Ok(mse.sqrt())
}

/// Euclidean distance between two weight vectors.
pub fn weight_distance(w: &Array1<f64>, w_hat: &Array1<f64>) -> f64 {
    w.iter().zip(w_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Distance between downstream weights fit on complete and on imputed data.
pub fn congeniality(complete: &Dataset, imputed: &ImputedMatrix, target: usize, lambda: f64) -> Result<f64> {
    if !complete.is_complete() {
        return Err(Error::InvalidArgument(
            "congeniality needs the complete data".to_string(),
        ));
    }
    if complete.values().dim() != imputed.values.dim() {
        return Err(Error::ShapeMismatch {
            expected: complete.values().dim(),
            found: imputed.values.dim(),
        });
    }
    let w = fit_target_model(complete.values(), target, lambda)?.weights;
    let w_hat = fit_target_model(&imputed.values, target, lambda)?.weights;
    Ok(weight_distance(&w, &w_hat))
}

/// Amputation options of a benchmark cell beyond mechanism and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmputeOptions {
    pub target_fraction: f64,
    pub targets: Option<Vec<usize>>,
    pub causes: Option<Vec<Vec<usize>>>,
    pub mar_form: MarForm,
    /// Keep the SCM's root nodes fully observed.
    pub protect_roots: bool,
}

impl Default for AmputeOptions {
    fn default() -> Self {
        Self {
            target_fraction: 0.3,
            targets: None,
            causes: None,
            mar_form: MarForm::CauseSets,
            protect_roots: true,
        }
    }
}

/// One fully specified pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub n: usize,
    pub d: usize,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub baseline: BaselineKind,
    /// `None` reports the baseline alone.
    pub refine: Option<TrainConfig>,
    pub seed: u64,
    /// Prediction target; defaults to the SCM's sink.
    pub target: Option<usize>,
    pub lambda: f64,
    pub train_fraction: f64,
    pub ampute: AmputeOptions,
    /// Fixed ground-truth graph instead of a random one.
    pub scm: Option<ScmSpec>,
    /// Z-score features with statistics of the observed training entries.
    pub standardize: bool,
    pub label: Option<String>,
}

impl CellConfig {
    pub fn new(n: usize, d: usize, mechanism: Mechanism, rate: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            mechanism,
            rate,
            baseline: BaselineKind::Mean,
            refine: Some(TrainConfig {
                seed,
                ..Default::default()
            }),
            seed,
            target: None,
            lambda: 1.0,
            train_fraction: 0.8,
            ampute: AmputeOptions::default(),
            scm: None,
            standardize: true,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub n: usize,
    pub d: usize,
    pub baseline: String,
    pub refined: bool,
    /// Active loss terms when refined.
    pub terms: Option<String>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub seed: u64,
    pub target: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    /// RMSE of the seed imputation before refinement.
    pub seed_rmse: f64,
    pub imputation_rmse: f64,
    pub prediction_rmse: f64,
    pub congeniality: f64,
    pub h_value: Option<f64>,
    pub edge_recovery: Option<f64>,
    /// Fraction of amputed cells whose squared error dropped after refinement.
    pub improved_fraction: Option<f64>,
    pub epochs: Option<usize>,
    pub converged: Option<bool>,
    #[serde(skip)]
    pub cell_errors: Vec<CellError>,
}

/// A report together with the artefacts needed by the structural studies.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub report: EvalReport,
    pub scm: ScmSpec,
    pub adjacency: Option<AdjacencyEstimate>,
}

/// Synthesize, split, ampute, standardize, seed-impute, refine, evaluate.
pub fn run_cell(cfg: &CellConfig) -> Result<CellOutcome> {
    if !(cfg.lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be > 0".to_string()));
    }
    let scm = match &cfg.scm {
        Some(s) => s.clone(),
        None => generate_scm(cfg.d, cfg.seed)?,
    };
    if scm.dim != cfg.d {
        return Err(Error::InvalidArgument(format!(
            "fixed graph has {} nodes but the cell asks for d = {}",
            scm.dim, cfg.d
        )));
    }
    let full = sample_scm(&scm, cfg.n, cfg.seed)?;
    let (train_raw, test_raw) = split_train_test(&full, cfg.train_fraction, cfg.seed)?;
    let target = cfg.target.unwrap_or_else(|| scm.sink());
    if target >= cfg.d {
        return Err(Error::InvalidArgument(format!("target {target} out of range")));
    }

    let opts = &cfg.ampute;
    let spec = AmputeSpec {
        mechanism: cfg.mechanism,
        rate: cfg.rate,
        target_fraction: opts.target_fraction,
        targets: opts.targets.clone(),
        causes: opts.causes.clone(),
        protected: if opts.protect_roots && opts.targets.is_none() {
            scm.roots()
        } else {
            Vec::new()
        },
        mar_form: opts.mar_form,
    };
    let (amputed_raw, _) = ampute_with_plan(&train_raw, &spec, cfg.seed)?;

    // Location and scale come from the observed training entries only.
    let (amputed, truth, test) = if cfg.standardize {
        let scaler = Standardizer::fit(&amputed_raw)?;
        (
            scaler.transform(&amputed_raw)?,
            scaler.transform(&train_raw)?,
            scaler.transform(&test_raw)?,
        )
    } else {
        (amputed_raw, train_raw, test_raw)
    };
    let mask = amputed.mask();

    let seed_imp = cfg.baseline.impute(&amputed)?;
    let seed_errors = cell_errors(&truth, &seed_imp, mask)?;
    let seed_rmse = imputation_rmse(&truth, &seed_imp, mask)?;

    let (final_imp, adjacency, h_value, epochs, converged) = match &cfg.refine {
        Some(tc) => {
            let out = train(&amputed, &seed_imp, tc)?;
            let h = h_of(&out.adjacency.weights)?;
            (
                out.imputed,
                Some(out.adjacency),
                Some(h),
                Some(out.log.len()),
                Some(out.converged),
            )
        }
        None => (seed_imp, None, None, None, None),
    };
    let errors = cell_errors(&truth, &final_imp, mask)?;
    let improved_fraction = cfg.refine.as_ref().map(|_| {
        let better = errors
            .iter()
            .zip(&seed_errors)
            .filter(|(a, b)| a.error < b.error)
            .count();
        better as f64 / errors.len() as f64
    });
    let edge_recovery = adjacency.as_ref().map(|a| edge_recovery_score(&scm, a)).transpose()?;
    let report = EvalReport {
        meta: ReportMeta {
            mechanism: cfg.mechanism,
            rate: cfg.rate,
            n: cfg.n,
            d: cfg.d,
            baseline: cfg.baseline.name().to_string(),
            refined: cfg.refine.is_some(),
            terms: cfg.refine.as_ref().map(|t| t.terms.label()),
            beta1: cfg.refine.as_ref().map(|t| t.beta1),
            beta2: cfg.refine.as_ref().map(|t| t.beta2),
            seed: cfg.seed,
            target,
            label: cfg.label.clone(),
        },
        seed_rmse,
        imputation_rmse: imputation_rmse(&truth, &final_imp, mask)?,
        prediction_rmse: prediction_rmse(&final_imp.values, &test, target, cfg.lambda)?,
        congeniality: congeniality(&truth, &final_imp, target, cfg.lambda)?,
        h_value,
        edge_recovery,
        improved_fraction,
        epochs,
        converged,
        cell_errors: errors,
    };
    Ok(CellOutcome { report, scm, adjacency })
}

/// Whether grid cells run the baseline, the refinement, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RefineMode {
    None,
    Miracle,
    #[default]
    Both,
}

/// Benchmark grid: every combination of the list fields, times every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub baselines: Vec<BaselineKind>,
    pub seeds: Vec<u64>,
    pub refine: RefineMode,
    /// Loss-term subsets to compare; empty means all terms only.
    pub ablation: Vec<LossTerms>,
    /// `(beta1, beta2)` pairs to sweep; empty means the training defaults.
    pub beta_sweep: Vec<(f64, f64)>,
    pub train: TrainConfig,
    pub lambda: f64,
    pub target: Option<usize>,
    pub train_fraction: f64,
    pub ampute: AmputeOptions,
    pub standardize: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1000],
            dims: vec![10],
            mechanisms: vec![Mechanism::Mar],
            rates: vec![0.3],
            baselines: vec![BaselineKind::Mean],
            seeds: (0..5).collect(),
            refine: RefineMode::Both,
            ablation: Vec::new(),
            beta_sweep: Vec::new(),
            train: TrainConfig::default(),
            lambda: 1.0,
            target: None,
            train_fraction: 0.8,
            ampute: AmputeOptions::default(),
            standardize: true,
        }
    }
}

fn config_error(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

/// Turns a serde path like `baselines[1].k` into `/baselines/1/k`.
fn path_to_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let mut rest = part;
        if let Some(i) = rest.find('[') {
            if i > 0 {
                out.push('/');
                out.push_str(&rest[..i]);
            }
            rest = &rest[i..];
            while let Some(end) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..end]);
                rest = &rest[end + 1..];
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

/// Baselines may be written as bare names or as tagged objects.
#[derive(Deserialize)]
#[serde(untagged)]
enum BaselineEntry {
    Name(String),
    Full(BaselineKind),
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| config_error("", format!("invalid JSON: {e}")))?;
        // normalise bare baseline names before typed parsing
        if let Some(list) = value.get_mut("baselines").and_then(|v| v.as_array_mut()) {
            for (i, item) in list.iter_mut().enumerate() {
                let entry: BaselineEntry = serde_json::from_value(item.clone()).map_err(|_| {
                    config_error(
                        &format!("/baselines/{i}"),
                        format!("expected a baseline (valid: {})", BaselineKind::NAMES.join(", ")),
                    )
                })?;
                let kind = match entry {
                    BaselineEntry::Name(name) => BaselineKind::from_name(&name)
                        .map_err(|e| config_error(&format!("/baselines/{i}"), e.to_string()))?,
                    BaselineEntry::Full(kind) => kind,
                };
                *item = serde_json::to_value(kind)?;
            }
        }
        let cfg: SuiteConfig = serde_path_to_error::deserialize(value)
            .map_err(|e| config_error(&path_to_pointer(&e.path().to_string()), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, bool); 6] = [
            ("/sizes", self.sizes.is_empty()),
            ("/dims", self.dims.is_empty()),
            ("/mechanisms", self.mechanisms.is_empty()),
            ("/rates", self.rates.is_empty()),
            ("/baselines", self.baselines.is_empty()),
            ("/seeds", self.seeds.is_empty()),
        ];
        if let Some((pointer, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(config_error(pointer, "must not be empty"));
        }
        if let Some(i) = self.rates.iter().position(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(config_error(&format!("/rates/{i}"), "rate must lie in (0, 1)"));
        }
        if let Some(i) = self.dims.iter().position(|d| *d < 2) {
            return Err(config_error(&format!("/dims/{i}"), "need at least 2 features"));
        }
        if let Some(i) = self.sizes.iter().position(|n| *n < 5) {
            return Err(config_error(&format!("/sizes/{i}"), "need at least 5 rows"));
        }
        if !(self.lambda > 0.0) {
            return Err(config_error("/lambda", "must be > 0"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_error("/train_fraction", "must lie in (0, 1)"));
        }
        self.train.validate().map_err(|e| config_error("/train", e.to_string()))
    }

    /// Expands the grid in a fixed order; seeds vary fastest.
    pub fn cells(&self) -> Vec<CellConfig> {
        let mut refinements: Vec<Option<TrainConfig>> = Vec::new();
        if self.refine != RefineMode::Miracle {
            refinements.push(None);
        }
        if self.refine != RefineMode::None {
            let term_sets = if self.ablation.is_empty() {
                vec![self.train.terms]
            } else {
                self.ablation.clone()
            };
            let betas = if self.beta_sweep.is_empty() {
                vec![(self.train.beta1, self.train.beta2)]
            } else {
                self.beta_sweep.clone()
            };
            for terms in &term_sets {
                for &(beta1, beta2) in &betas {
                    refinements.push(Some(TrainConfig {
                        terms: *terms,
                        beta1,
                        beta2,
                        ..self.train.clone()
                    }));
                }
            }
        }
        let mut cells = Vec::new();
        for &mechanism in &self.mechanisms {
            for &rate in &self.rates {
                for &n in &self.sizes {
                    for &d in &self.dims {
                        for baseline in &self.baselines {
                            for refine in &refinements {
                                for &seed in &self.seeds {
                                    cells.push(CellConfig {
                                        n,
                                        d,
                                        mechanism,
                                        rate,
                                        baseline: *baseline,
                                        refine: refine.clone().map(|t| TrainConfig { seed, ..t }),
                                        seed,
                                        target: self.target,
                                        lambda: self.lambda,
                                        train_fraction: self.train_fraction,
                                        ampute: self.ampute.clone(),
                                        scm: None,
                                        standardize: self.standardize,
                                        label: None,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Outcome of one grid cell; failures are kept rather than aborting the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub config: CellConfig,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Runs `cells` on `jobs` worker threads (0 = all cores), in grid order.
pub fn run_cells(cells: &[CellConfig], jobs: usize) -> Result<Vec<CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|cell| match run_cell(cell) {
                Ok(out) => CellResult {
                    config: cell.clone(),
                    report: Some(out.report),
                    error: None,
                },
                Err(e) => {
                    log::warn!("cell failed (seed {}): {e}", cell.seed);
                    CellResult {
                        config: cell.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect()
    }))
}

pub fn run_benchmark(suite: &SuiteConfig, jobs: usize) -> Result<Vec<CellResult>> {
    suite.validate()?;
    run_cells(&suite.cells(), jobs)
}

/// Mean and sample standard deviation over seeds of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub n: usize,
    pub d: usize,
    pub baseline: String,
    pub refined: bool,
    pub terms: String,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub seeds: usize,
    pub failures: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub seed_rmse_mean: f64,
    pub pred_rmse: f64,
    pub pred_rmse_std: f64,
    pub congeniality: f64,
    pub congeniality_std: f64,
    pub h_value: Option<f64>,
    pub edge_recovery: Option<f64>,
}

fn optional_mean(values: Vec<Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.into_iter().collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

/// Groups results by every meta field except the seed, keeping first-seen order.
pub fn aggregate(results: &[CellResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<usize, (String, Vec<&CellResult>)> = BTreeMap::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in results {
        let c = &r.config;
        let key = format!(
            "{}|{}|{}|{}|{}|{:?}|{:?}",
            c.mechanism,
            c.rate,
            c.n,
            c.d,
            serde_json::to_string(&c.baseline).unwrap_or_default(),
            c.refine.as_ref().map(|t| (t.terms.label(), t.beta1, t.beta2)),
            c.label
        );
        let next = index.len();
        let slot = *index.entry(key.clone()).or_insert(next);
        groups.entry(slot).or_insert_with(|| (key, Vec::new())).1.push(r);
    }
    groups
        .into_values()
        .map(|(_, members)| {
            let c = &members[0].config;
            let reports: Vec<&EvalReport> = members.iter().filter_map(|m| m.report.as_ref()).collect();
            let col = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let rmse = col(&|r| r.imputation_rmse);
            let pred = col(&|r| r.prediction_rmse);
            let cong = col(&|r| r.congeniality);
            AggregateRow {
                mechanism: c.mechanism,
                rate: c.rate,
                n: c.n,
                d: c.d,
                baseline: c.baseline.name().to_string(),
                refined: c.refine.is_some(),
                terms: c
                    .refine
                    .as_ref()
                    .map(|t| t.terms.label())
                    .unwrap_or_else(|| "-".to_string()),
                beta1: c.refine.as_ref().map(|t| t.beta1),
                beta2: c.refine.as_ref().map(|t| t.beta2),
                seeds: reports.len(),
                failures: members.len() - reports.len(),
                rmse_mean: mean(&rmse),
                rmse_std: sample_std(&rmse),
                seed_rmse_mean: mean(&col(&|r| r.seed_rmse)),
                pred_rmse: mean(&pred),
                pred_rmse_std: sample_std(&pred),
                congeniality: mean(&cong),
                congeniality_std: sample_std(&cong),
                h_value: optional_mean(reports.iter().map(|r| r.h_value).collect()),
                edge_recovery: optional_mean(reports.iter().map(|r| r.edge_recovery).collect()),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mechanism",
        "rate",
        "n",
        "d",
        "baseline",
        "refined",
        "terms",
        "beta1",
        "beta2",
        "seeds",
        "failures",
        "rmse_mean",
        "rmse_std",
        "seed_rmse_mean",
        "pred_rmse",
        "pred_rmse_std",
        "congeniality",
        "congeniality_std",
        "h_value",
        "edge_recovery",
    ])?;
    for r in rows {
        w.write_record([
            r.mechanism.to_string(),
            r.rate.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.baseline.clone(),
            r.refined.to_string(),
            r.terms.clone(),
            opt(r.beta1),
            opt(r.beta2),
            r.seeds.to_string(),
            r.failures.to_string(),
            r.rmse_mean.to_string(),
            r.rmse_std.to_string(),
            r.seed_rmse_mean.to_string(),
            r.pred_rmse.to_string(),
            r.pred_rmse_std.to_string(),
            r.congeniality.to_string(),
            r.congeniality_std.to_string(),
            opt(r.h_value),
            opt(r.edge_recovery),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cell_errors_csv(path: impl AsRef<Path>, errors: &[CellError]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "col", "squared_error"])?;
    for e in errors {
        w.write_record([e.row.to_string(), e.col.to_string(), e.error.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-cell JSON reports, per-cell error CSVs and `aggregate.csv` under `dir`.
pub fn write_benchmark(dir: impl AsRef<Path>, results: &[CellResult]) -> Result<Vec<AggregateRow>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("cells"))?;
    for (i, r) in results.iter().enumerate() {
        let stem = dir.join("cells").join(format!("cell_{i:04}"));
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(r)?)?;
        if let Some(report) = &r.report {
            write_cell_errors_csv(stem.with_extension("errors.csv"), &report.cell_errors)?;
        }
    }
    let rows = aggregate(results);
    write_aggregate_csv(dir.join("aggregate.csv"), &rows)?;
    Ok(rows)
}

/// Nine-node graph of the missingness-location study; `X9` is isolated.
pub fn location_scm() -> ScmSpec {
    let edges = [
        (0, 1, 1.0),
        (0, 2, 1.0),
        (1, 4, 1.0),
        (2, 4, 1.0),
        (4, 5, 1.0),
        (4, 6, 1.0),
        (3, 6, 1.0),
        (6, 7, 1.0),
    ];
    ScmSpec::from_edges(9, &edges, 1.0).expect("location graph is acyclic")
}

/// Settings shared by every run of the location study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationConfig {
    pub n: usize,
    pub rate: f64,
    pub baseline: BaselineKind,
    pub train: TrainConfig,
    /// The study works on the raw SCM scale by default.
    pub standardize: bool,
}

impl Default for LocationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            rate: 0.3,
            baseline: BaselineKind::Mean,
            train: TrainConfig::default(),
            standardize: false,
        }
    }
}

/// One run of the location study: `target` amputed, missingness driven by `cause`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRow {
    pub cause: usize,
    pub seed: u64,
    pub baseline_rmse: f64,
    pub miracle_rmse: f64,
    /// Mean learned weight into the target from its true parents.
    pub parent_weight: f64,
    /// Mean learned weight into the target from every other feature.
    pub nonparent_weight: f64,
}

/// MAR missingness in `target` caused by `cause`; MNAR when they coincide.
pub fn location_run(
    scm: &ScmSpec,
    target: usize,
    cause: usize,
    cfg: &LocationConfig,
    seed: u64,
) -> Result<LocationRow> {
    if target >= scm.dim || cause >= scm.dim {
        return Err(Error::InvalidArgument("location study index out of range".to_string()));
    }
    let mechanism = if cause == target {
        Mechanism::Mnar
    } else {
        Mechanism::Mar
    };
    let cell = CellConfig {
        baseline: cfg.baseline,
        refine: Some(TrainConfig {
            seed,
            ..cfg.train.clone()
        }),
        target: Some(target),
        scm: Some(scm.clone()),
        ampute: AmputeOptions {
            targets: Some(vec![target]),
            causes: (mechanism == Mechanism::Mar).then(|| vec![vec![cause]]),
            protect_roots: false,
            ..Default::default()
        },
        standardize: cfg.standardize,
        label: Some(format!("cause=X{}", cause + 1)),
        ..CellConfig::new(cfg.n, scm.dim, mechanism, cfg.rate, seed)
    };
    let out = run_cell(&cell)?;
    let adjacency = out.adjacency.expect("refined cell has an adjacency");
    let block = adjacency.feature_block();
    let incoming = block.index_axis(Axis(1), target);
    let parents = scm.parents(target);
    let others: Vec<usize> = (0..scm.dim).filter(|k| *k != target && !parents.contains(k)).collect();
    let avg = |ks: &[usize]| ks.iter().map(|&k| incoming[k]).sum::<f64>() / ks.len().max(1) as f64;
    Ok(LocationRow {
        cause,
        seed,
        baseline_rmse: out.report.seed_rmse,
        miracle_rmse: out.report.imputation_rmse,
        parent_weight: avg(&parents),
        nonparent_weight: avg(&others),
    })
}

/// Every cause in turn, for every seed, in parallel.
pub fn location_study(scm: &ScmSpec, target: usize, cfg: &LocationConfig, seeds: &[u64]) -> Result<Vec<LocationRow>> {
    let jobs: Vec<(usize, u64)> = (0..scm.dim).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    jobs.par_iter()
        .map(|&(cause, seed)| location_run(scm, target, cause, cfg, seed))
        .collect()
}

/// Mean edge-recovery score of refined runs per sample size.
pub fn edge_recovery_by_size(
    sizes: &[usize],
    d: usize,
    mechanism: Mechanism,
    train: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<(usize, f64)>> {
    let cells: Vec<CellConfig> = sizes
        .iter()
        .flat_map(|&n| {
            seeds.iter().map(move |&seed| CellConfig {
                refine: Some(TrainConfig { seed, ..train.clone() }),
                ..CellConfig::new(n, d, mechanism, 0.3, seed)
            })
        })
        .collect();
    let results = run_cells(&cells, jobs)?;
    sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let chunk = &results[i * seeds.len()..(i + 1) * seeds.len()];
            let scores = chunk
                .iter()
                .map(|r| match &r.report {
                    Some(rep) => rep
                        .edge_recovery
                        .ok_or_else(|| Error::InvalidArgument("missing score".into())),
                    None => Err(Error::InvalidArgument(r.error.clone().unwrap_or_default())),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((n, mean(&scores)))
        })
        .collect()
}
