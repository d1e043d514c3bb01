//! Training objective: reconstruction + acyclicity + moment matching.
//!
//! `L = w_L1 * L1 + beta1 * R1 + beta2 * R2`, with hand-derived gradients.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::acyclicity::{h_and_grad, AcyclicityPenalty};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{
    backward, extract_adjacency, forward_trace, sigmoid, GradientSet, NetworkParams, Trace, PROB_CEIL, PROB_FLOOR,
};

/// Term weights of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight on the reconstruction term; 1 normally, 0 to ablate it.
    pub l1: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default)]
    pub penalty: AcyclicityPenalty,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l1: 1.0,
            beta1: 0.1,
            beta2: 1.0,
            penalty: AcyclicityPenalty::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1_recon: f64,
    pub l1_xent: f64,
    pub r1: f64,
    pub r2: f64,
    pub total: f64,
    pub h_value: f64,
}

fn check_inputs(params: &NetworkParams, input: &Array2<f64>, data: &Dataset) -> Result<()> {
    if input.dim() != data.values().dim() {
        return Err(Error::ShapeMismatch {
            expected: data.values().dim(),
            found: input.dim(),
        });
    }
    if params.n_features != data.n_features() || params.missing != data.missing_features() {
        return Err(Error::InvalidArgument(
            "network layout does not match the dataset's missing features".to_string(),
        ));
    }
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Squared error over observed cells and cross-entropy of the missingness
/// heads, both averaged over rows: `(recon, xent)`.
fn l1_parts(trace: &Trace, data: &Dataset) -> (f64, f64) {
    let n = data.n_rows() as f64;
    let imp = &trace.forward.imp;
    let mut recon = 0.0;
    for ((ix, &m), &pred) in data.mask().indexed_iter().zip(imp.iter()) {
        if m {
            recon += (data.values()[ix] - pred).powi(2);
        }
    }
    let mut xent = 0.0;
    for (m, &s) in data.missing_features().iter().enumerate() {
        for i in 0..data.n_rows() {
            let p = trace.forward.miss[[i, m]];
            xent -= if data.is_observed(i, s) { p.ln() } else { (1.0 - p).ln() };
        }
    }
    (recon / n, xent / n)
}

/// Per missing feature: `(tau_sipw, tau_mean, weight_sum)`.
fn moment_estimates(trace: &Trace, data: &Dataset) -> Vec<(f64, f64, f64)> {
    let n = data.n_rows();
    data.missing_features()
        .iter()
        .enumerate()
        .map(|(m, &s)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                if data.is_observed(i, s) {
                    let e = 1.0 / trace.forward.miss[[i, m]];
                    num += e * data.values()[[i, s]];
                    den += e;
                }
            }
            let tau_mean = trace.forward.imp.column(s).sum() / n as f64;
            if den > 0.0 {
                (num / den, tau_mean, den)
            } else {
                // no observed rows (possible in a mini-batch): nothing to match
                (tau_mean, tau_mean, 0.0)
            }
        })
        .collect()
}

fn r2_value(est: &[(f64, f64, f64)]) -> f64 {
    est.iter().map(|(s, m, _)| (s - m).powi(2)).sum()
}

/// Reconstruction loss `L1`.
pub fn loss_l1(params: &NetworkParams, input: &Array2<f64>, data: &Dataset) -> Result<f64> {
    check_inputs(params, input, data)?;
    let trace = forward_trace(params, input)?;
    let (r, x) = l1_parts(&trace, data);
    Ok(r + x)
}

/// Acyclicity regularizer `R1 = h^2 / 2 + h`.
pub fn loss_r1(params: &NetworkParams, penalty: AcyclicityPenalty) -> Result<f64> {
    let b = extract_adjacency(params);
    let (h, _) = h_and_grad(&b.weights, penalty)?;
    Ok(0.5 * h * h + h)
}

/// Moment regularizer `R2`: squared gap between the stabilized IPW mean of
/// each partially observed feature and the mean of its imputations.
pub fn loss_r2(params: &NetworkParams, input: &Array2<f64>, data: &Dataset) -> Result<f64> {
    check_inputs(params, input, data)?;
    for &s in data.missing_features() {
        if !data.mask().column(s).iter().any(|m| *m) {
            return Err(Error::FullyMissingColumn {
                column: data.feature_names()[s].clone(),
            });
        }
    }
    let trace = forward_trace(params, input)?;
    Ok(r2_value(&moment_estimates(&trace, data)))
}

/// Stabilized IPW estimate of a mean: `sum(e r x) / sum(e r)` with `e = 1/p`.
pub fn sipw_mean(probs: &[f64], observed: &[bool], x: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((p, r), v) in probs.iter().zip(observed).zip(x) {
        if *r {
            num += v / p;
            den += 1.0 / p;
        }
    }
    num / den
}

/// Loss breakdown without gradients.
pub fn loss_breakdown(
    params: &NetworkParams,
    input: &Array2<f64>,
    data: &Dataset,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    check_inputs(params, input, data)?;
    let trace = forward_trace(params, input)?;
    let (recon, xent) = l1_parts(&trace, data);
    let r2 = r2_value(&moment_estimates(&trace, data));
    let b = extract_adjacency(params);
    let (h, _) = h_and_grad(&b.weights, w.penalty)?;
    let r1 = 0.5 * h * h + h;
    Ok(LossBreakdown {
        l1_recon: recon,
        l1_xent: xent,
        r1,
        r2,
        total: w.l1 * (recon + xent) + w.beta1 * r1 + w.beta2 * r2,
        h_value: h,
    })
}

fn miss_unclamped(raw: f64) -> bool {
    let s = sigmoid(raw);
    (PROB_FLOOR..=PROB_CEIL).contains(&s)
}

/// Objective value and its exact gradient.
pub fn total_loss_and_grad(
    params: &NetworkParams,
    input: &Array2<f64>,
    data: &Dataset,
    w: &LossWeights,
) -> Result<(LossBreakdown, GradientSet)> {
    if !(w.beta1 >= 0.0 && w.beta2 >= 0.0 && w.l1 >= 0.0) {
        return Err(Error::InvalidArgument("loss weights must be >= 0".to_string()));
    }
    check_inputs(params, input, data)?;
    let trace = forward_trace(params, input)?;
    let (n, d) = (data.n_rows(), data.n_features());
    let nf = n as f64;
    let (recon, xent) = l1_parts(&trace, data);
    let moments = moment_estimates(&trace, data);
    let r2 = r2_value(&moments);
    let adjacency = extract_adjacency(params);
    let (h, dh) = h_and_grad(&adjacency.weights, w.penalty)?;
    let r1 = 0.5 * h * h + h;
    let breakdown = LossBreakdown {
        l1_recon: recon,
        l1_xent: xent,
        r1,
        r2,
        total: w.l1 * (recon + xent) + w.beta1 * r1 + w.beta2 * r2,
        h_value: h,
    };
    for (term, v) in [("L1", recon + xent), ("R1", r1), ("R2", r2)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss term {term}")));
        }
    }

    let imp = &trace.forward.imp;
    let probs = &trace.forward.miss;
    let mut g_raw: Vec<Array1<f64>> = (0..d + data.missing_features().len())
        .map(|_| Array1::zeros(n))
        .collect();

    if w.l1 != 0.0 {
        for j in 0..d {
            let g = &mut g_raw[j];
            for i in 0..n {
                if data.is_observed(i, j) {
                    g[i] += w.l1 * 2.0 * (imp[[i, j]] - data.values()[[i, j]]) / nf;
                }
            }
        }
        for (m, &s) in data.missing_features().iter().enumerate() {
            let g = &mut g_raw[d + m];
            let raw = &trace.raw[d + m];
            for i in 0..n {
                if miss_unclamped(raw[i]) {
                    let r = if data.is_observed(i, s) { 1.0 } else { 0.0 };
                    g[i] += w.l1 * (probs[[i, m]] - r) / nf;
                }
            }
        }
    }
    if w.beta2 != 0.0 {
        for (m, (&s, &(tau_s, tau_m, den))) in data.missing_features().iter().zip(&moments).enumerate() {
            let diff = tau_s - tau_m;
            g_raw[s].mapv_inplace(|g| g - w.beta2 * 2.0 * diff / nf);
            let raw = &trace.raw[d + m];
            let g = &mut g_raw[d + m];
            for i in 0..n {
                if data.is_observed(i, s) && miss_unclamped(raw[i]) {
                    let p = probs[[i, m]];
                    let x = data.values()[[i, s]];
                    g[i] -= w.beta2 * 2.0 * diff * (x - tau_s) * (1.0 - p) / (p * den);
                }
            }
        }
    }
    if g_raw.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("gradient of L1/R2 output terms".to_string()));
    }

    let mut grads = backward(params, input, &trace, &g_raw);

    if w.beta1 != 0.0 {
        let coeff = w.beta1 * (h + 1.0);
        let heads = grads.0.imp.iter_mut().chain(grads.0.miss.iter_mut());
        for ((c, gh), head) in heads.enumerate().zip(params.heads()) {
            for k in 0..d {
                let norm = adjacency.weights[[k, c]];
                if norm > 0.0 && k != head.masked_input {
                    let scale = coeff * dh[[k, c]] / norm;
                    let col = head.input.column(k);
                    gh.input.column_mut(k).zip_mut_with(&col, |g, &v| *g += scale * v);
                }
            }
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient of R1".to_string()));
    }
    Ok((breakdown, grads))
}
