//! Adam optimization of the objective plus the bootstrap refresh loop.
//!
//! Every `refresh_interval` epochs the current imputations are merged with
//! the observed data, pushed onto a bounded queue, and the network input is
//! replaced by the average of that queue.

use std::collections::VecDeque;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acyclicity::{is_acyclic, AcyclicityPenalty};
use crate::data::{merge_imputation, Dataset, ImputedMatrix};
use crate::error::{Error, Result};
use crate::losses::{total_loss_and_grad, LossBreakdown, LossWeights};
use crate::network::{
    extract_adjacency, forward, init_params, AdjacencyEstimate, GradientSet, NetworkParams, DEFAULT_THRESHOLD,
};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Which objective terms are active (all three by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossTerms {
    pub l1: bool,
    pub r1: bool,
    pub r2: bool,
}

impl Default for LossTerms {
    fn default() -> Self {
        Self {
            l1: true,
            r1: true,
            r2: true,
        }
    }
}

impl LossTerms {
    pub fn label(&self) -> String {
        let parts: Vec<&str> = [(self.l1, "L1"), (self.r1, "R1"), (self.r2, "R2")]
            .iter()
            .filter_map(|(on, name)| on.then_some(*name))
            .collect();
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Strength of the acyclicity regularizer.
    pub beta1: f64,
    /// Strength of the moment regularizer.
    pub beta2: f64,
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs between input refreshes; 0 disables refreshing.
    pub refresh_interval: usize,
    /// Capacity of the imputation queue.
    pub queue_capacity: usize,
    /// RMS change of the missing entries below which training stops.
    pub tolerance: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Hidden width; `None` means `d`.
    pub hidden: Option<usize>,
    pub depth: usize,
    pub terms: LossTerms,
    pub penalty: AcyclicityPenalty,
    /// Threshold used for the binary graph view.
    pub threshold: f64,
    /// Rows per gradient step; `None` takes one full-batch step per epoch.
    pub batch_size: Option<usize>,
    /// Multiplier on the initial input-layer weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta1: 0.1,
            beta2: 1.0,
            lr: 0.0005,
            max_epochs: 300,
            refresh_interval: 10,
            queue_capacity: 10,
            tolerance: 1e-3,
            seed: 0,
            adam: AdamConfig::default(),
            hidden: None,
            depth: 3,
            terms: LossTerms::default(),
            penalty: AcyclicityPenalty::Exponential,
            threshold: DEFAULT_THRESHOLD,
            batch_size: None,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return bad("beta1 and beta2 must be >= 0".into());
        }
        if !(self.lr > 0.0) {
            return bad(format!("learning rate must be > 0, got {}", self.lr));
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be >= 1".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be >= 0".into());
        }
        if self.depth < 3 {
            return bad(format!("depth must be >= 3, got {}", self.depth));
        }
        if self.hidden == Some(0) {
            return bad("hidden size must be >= 1".into());
        }
        if !(self.threshold > 0.0) {
            return bad("threshold must be > 0".into());
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be finite and >= 0".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be >= 1".into());
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            l1: if self.terms.l1 { 1.0 } else { 0.0 },
            beta1: if self.terms.r1 { self.beta1 } else { 0.0 },
            beta2: if self.terms.r2 { self.beta2 } else { 0.0 },
            penalty: self.penalty,
        }
    }
}

/// Adam moment buffers, one per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &NetworkParams, cfg: AdamConfig) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self {
            cfg,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update; structural zeros are restored after.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &GradientSet, lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.apply_masks();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    /// RMS change of the missing entries at a refresh, if one happened.
    pub delta_x0: Option<f64>,
}

/// Mutable state of one training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: NetworkParams,
    pub adam: Adam,
    pub queue: VecDeque<Array2<f64>>,
    pub x0: Array2<f64>,
    pub epoch: usize,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub imputed: ImputedMatrix,
    pub params: NetworkParams,
    pub adjacency: AdjacencyEstimate,
    pub log: Vec<LogEntry>,
    pub converged: bool,
}

fn rms_missing_change(data: &Dataset, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((ix, m), (x, y)) in data.mask().indexed_iter().zip(a.iter().zip(b.iter())) {
        if !*m {
            let _ = ix;
            sum += (x - y).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Refines `seed_imputation` of `data`.
pub fn train(data: &Dataset, seed_imputation: &ImputedMatrix, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let hidden = cfg.hidden.unwrap_or(data.n_features());
    let mut params = init_params(data.n_features(), data.missing_features(), hidden, cfg.depth, cfg.seed)?;
    if cfg.init_scale != 1.0 {
        for head in params.imp.iter_mut().chain(params.miss.iter_mut()) {
            head.input *= cfg.init_scale;
        }
    }
    train_from(data, seed_imputation, params, cfg)
}

/// As [`train`], starting from given parameters (e.g. a checkpoint).
pub fn train_from(
    data: &Dataset,
    seed_imputation: &ImputedMatrix,
    params: NetworkParams,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    params.validate()?;
    if params.n_features != data.n_features() || params.missing != data.missing_features() {
        return Err(Error::InvalidArgument(
            "initial parameters do not match the dataset layout".to_string(),
        ));
    }
    data.check_columns_observed()?;
    // the seed must agree with the observed cells; merging enforces it
    let x0 = merge_imputation(data, &seed_imputation.values)?.values;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("seed imputation".to_string()));
    }
    let mut state = TrainState {
        adam: Adam::new(&params, cfg.adam),
        params,
        queue: VecDeque::with_capacity(cfg.queue_capacity),
        x0,
        epoch: 0,
        log: Vec::with_capacity(cfg.max_epochs),
    };
    let complete = data.is_complete();
    if complete {
        log::warn!("dataset has no missing values; returning the seed imputation unchanged");
    }
    let weights = cfg.loss_weights();
    let mut batch_rng = rng_for(cfg.seed, 5);
    let mut converged = false;
    while state.epoch < cfg.max_epochs {
        state.epoch += 1;
        let epoch = state.epoch;
        let loss = run_epoch(&mut state, data, cfg, &weights, &mut batch_rng)?;
        let mut entry = LogEntry {
            epoch,
            loss,
            delta_x0: None,
        };
        if !complete && cfg.refresh_interval > 0 && epoch.is_multiple_of(cfg.refresh_interval) {
            let delta = refresh(&mut state, data, cfg.queue_capacity)?;
            entry.delta_x0 = Some(delta);
            state.log.push(entry);
            if state.queue.len() == cfg.queue_capacity && delta < cfg.tolerance {
                log::info!("converged at epoch {epoch} (delta {delta:.3e})");
                converged = true;
                break;
            }
        } else {
            state.log.push(entry);
        }
    }
    if !complete && cfg.refresh_interval == 0 {
        // without refreshes the network output is the only imputation
        let imp = forward(&state.params, &state.x0)?.imp;
        state.x0 = merge_imputation(data, &imp)?.values;
    }
    let mut adjacency = extract_adjacency(&state.params);
    adjacency.threshold = cfg.threshold;
    let imputed = merge_imputation(data, &state.x0)?.with_provenance("miracle");
    Ok(TrainOutput {
        imputed,
        params: state.params,
        adjacency,
        log: state.log,
        converged,
    })
}

/// One pass over the data: a single full-batch step, or one step per shuffled
/// mini-batch. Returns the loss averaged over the steps taken.
fn run_epoch(
    state: &mut TrainState,
    data: &Dataset,
    cfg: &TrainConfig,
    weights: &LossWeights,
    rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown> {
    let epoch = state.epoch;
    let diverged = |e: Error| match e {
        Error::NonFinite(term) => Error::Diverged { epoch, term },
        other => other,
    };
    let n = data.n_rows();
    let batches: Vec<Vec<usize>> = match cfg.batch_size {
        Some(b) if b < n => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(rng);
            rows.chunks(b).map(|c| c.to_vec()).collect()
        }
        _ => Vec::new(),
    };
    let mut steps = Vec::with_capacity(batches.len().max(1));
    if batches.is_empty() {
        let (loss, grads) = total_loss_and_grad(&state.params, &state.x0, data, weights).map_err(diverged)?;
        state.adam.step(&mut state.params, &grads, cfg.lr);
        steps.push(loss);
    } else {
        for rows in &batches {
            let batch = data.row_batch(rows);
            let input = state.x0.select(Axis(0), rows);
            let (loss, grads) = total_loss_and_grad(&state.params, &input, &batch, weights).map_err(diverged)?;
            state.adam.step(&mut state.params, &grads, cfg.lr);
            steps.push(loss);
        }
    }
    let k = steps.len() as f64;
    let avg = |f: fn(&LossBreakdown) -> f64| steps.iter().map(f).sum::<f64>() / k;
    let loss = LossBreakdown {
        l1_recon: avg(|l| l.l1_recon),
        l1_xent: avg(|l| l.l1_xent),
        r1: avg(|l| l.r1),
        r2: avg(|l| l.r2),
        total: avg(|l| l.total),
        h_value: steps.last().map(|l| l.h_value).unwrap_or(0.0),
    };
    if !loss.total.is_finite() {
        return Err(Error::Diverged {
            epoch,
            term: "total".to_string(),
        });
    }
    Ok(loss)
}

/// Pushes the current merged imputation and re-averages the input.
/// Returns the RMS change of the missing entries.
fn refresh(state: &mut TrainState, data: &Dataset, capacity: usize) -> Result<f64> {
    let imp = forward(&state.params, &state.x0)
        .map_err(|e| Error::Diverged {
            epoch: state.epoch,
            term: format!("refresh ({e})"),
        })?
        .imp;
    let merged = merge_imputation(data, &imp)?.values;
    if state.queue.len() == capacity {
        state.queue.pop_front();
    }
    state.queue.push_back(merged);
    let mut avg = Array2::<f64>::zeros(state.x0.dim());
    for m in &state.queue {
        avg += m;
    }
    avg /= state.queue.len() as f64;
    // averaging can perturb observed cells in the last bit; pin them
    let avg = merge_imputation(data, &avg)?.values;
    let delta = rms_missing_change(data, &state.x0, &avg);
    state.x0 = avg;
    Ok(delta)
}

/// Binary view of an adjacency estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedDag {
    pub adjacency: Array2<bool>,
    pub acyclic: bool,
}

/// Keeps entries `>= tau` and checks the result for cycles.
pub fn threshold_dag(est: &AdjacencyEstimate, tau: f64) -> Result<ThresholdedDag> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be > 0, got {tau}")));
    }
    let adjacency = est.weights.mapv(|w| w >= tau);
    let acyclic = is_acyclic(&adjacency);
    Ok(ThresholdedDag { adjacency, acyclic })
}
