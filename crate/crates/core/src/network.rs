//! Two-headed network: `d` imputation heads and `d_S` missingness heads.
//!
//! Every head owns its input layer (`h x d`) and its output row (`1 x h`);
//! the `depth - 2` hidden layers in between are shared by all heads. Input
//! column `j` of imputation head `j` is pinned to zero, as is column `S[j]` of
//! missingness head `j`, so no output can depend on its own feature.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_for;

/// Bounds applied to missingness probabilities.
pub const PROB_FLOOR: f64 = 1e-6;
pub const PROB_CEIL: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// `h x d` input weights.
    pub input: Array2<f64>,
    pub input_bias: Array1<f64>,
    /// `1 x h` output row, stored flat.
    pub output: Array1<f64>,
    pub output_bias: f64,
    /// Input column held at zero.
    pub masked_input: usize,
}

impl Head {
    fn zero_masked(&mut self) {
        self.input.column_mut(self.masked_input).fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n_features: usize,
    pub hidden: usize,
    /// Total layer count `M` (input layer, `M - 2` shared, output row).
    pub depth: usize,
    /// Indices `S` of the partially observed features.
    pub missing: Vec<usize>,
    pub imp: Vec<Head>,
    pub miss: Vec<Head>,
    pub shared: Vec<Array2<f64>>,
    pub shared_bias: Vec<Array1<f64>>,
}

/// Random parameters with bound `1 / sqrt(fan_in)`; masked columns are zero.
pub fn init_params(d: usize, missing: &[usize], hidden: usize, depth: usize, seed: u64) -> Result<NetworkParams> {
    if hidden == 0 {
        return Err(Error::InvalidArgument("hidden size must be >= 1".to_string()));
    }
    if depth < 3 {
        return Err(Error::InvalidArgument(format!("depth must be >= 3, got {depth}")));
    }
    if missing.iter().any(|&j| j >= d) || missing.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "missing feature indices must be sorted, unique, and < d".to_string(),
        ));
    }
    let mut rng = rng_for(seed, 4);
    let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
    };
    let head = |masked: usize, uniform: &mut dyn FnMut(usize, usize, usize) -> Array2<f64>| {
        let mut h = Head {
            input: uniform(hidden, d, d),
            input_bias: uniform(1, hidden, d).into_shape_with_order(hidden).expect("1 x h"),
            output: uniform(1, hidden, hidden).into_shape_with_order(hidden).expect("1 x h"),
            output_bias: uniform(1, 1, hidden)[[0, 0]],
            masked_input: masked,
        };
        h.zero_masked();
        h
    };
    let imp: Vec<Head> = (0..d).map(|j| head(j, &mut uniform)).collect();
    let miss: Vec<Head> = missing.iter().map(|&s| head(s, &mut uniform)).collect();
    let shared = (0..depth - 2).map(|_| uniform(hidden, hidden, hidden)).collect();
    let shared_bias = (0..depth - 2)
        .map(|_| uniform(1, hidden, hidden).into_shape_with_order(hidden).expect("1 x h"))
        .collect();
    Ok(NetworkParams {
        n_features: d,
        hidden,
        depth,
        missing: missing.to_vec(),
        imp,
        miss,
        shared,
        shared_bias,
    })
}

impl NetworkParams {
    pub fn n_missing(&self) -> usize {
        self.missing.len()
    }

    /// Scalar count of every tensor, masked entries included.
    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Closed-form count from the shapes.
    pub fn expected_param_count(d: usize, d_s: usize, hidden: usize, depth: usize) -> usize {
        (d + d_s) * (hidden * d + 2 * hidden + 1) + (depth - 2) * (hidden * hidden + hidden)
    }

    /// Imputation heads then missingness heads.
    pub fn heads(&self) -> impl Iterator<Item = &Head> {
        self.imp.iter().chain(self.miss.iter())
    }

    fn heads_mut(&mut self) -> impl Iterator<Item = &mut Head> {
        self.imp.iter_mut().chain(self.miss.iter_mut())
    }

    /// Re-pins the structural zeros.
    pub fn apply_masks(&mut self) {
        for h in self.heads_mut() {
            h.zero_masked();
        }
    }

    /// Same shapes, all zeros (masks kept).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for h in self.heads() {
            out.push(h.input.as_slice().expect("standard layout"));
            out.push(h.input_bias.as_slice().expect("standard layout"));
            out.push(h.output.as_slice().expect("standard layout"));
            out.push(std::slice::from_ref(&h.output_bias));
        }
        for (w, b) in self.shared.iter().zip(&self.shared_bias) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for h in self.imp.iter_mut().chain(self.miss.iter_mut()) {
            out.push(h.input.as_slice_mut().expect("standard layout"));
            out.push(h.input_bias.as_slice_mut().expect("standard layout"));
            out.push(h.output.as_slice_mut().expect("standard layout"));
            out.push(std::slice::from_mut(&mut h.output_bias));
        }
        for (w, b) in self.shared.iter_mut().zip(self.shared_bias.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let p: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        p.validate()?;
        Ok(p)
    }

    /// Checks every tensor against the shape header.
    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.n_features, self.hidden);
        let bad = |what: &str| Err(Error::InvalidArgument(format!("checkpoint: bad shape for {what}")));
        if self.depth < 3 || self.shared.len() != self.depth - 2 || self.shared_bias.len() != self.depth - 2 {
            return bad("shared layers");
        }
        if self.imp.len() != d || self.miss.len() != self.missing.len() {
            return bad("head count");
        }
        for (i, head) in self.heads().enumerate() {
            let masked_ok = if i < d {
                head.masked_input == i
            } else {
                head.masked_input == self.missing[i - d]
            };
            if head.input.dim() != (h, d) || head.input_bias.len() != h || head.output.len() != h || !masked_ok {
                return bad(&format!("head {i}"));
            }
        }
        if self.shared.iter().any(|w| w.dim() != (h, h)) || self.shared_bias.iter().any(|b| b.len() != h) {
            return bad("shared layers");
        }
        Ok(())
    }
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub NetworkParams);

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self(params.zeros_like())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.0.tensors()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.0.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

#[inline]
pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Network outputs for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// `n x d` imputations.
    pub imp: Array2<f64>,
    /// `n x d_S` clamped missingness probabilities.
    pub miss: Array2<f64>,
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct Trace {
    /// Per head: pre-activations of each hidden layer.
    pre: Vec<Vec<Array2<f64>>>,
    /// Per head: post-activations of each hidden layer.
    act: Vec<Vec<Array2<f64>>>,
    /// Per head: raw (pre-sigmoid) output.
    pub(crate) raw: Vec<Array1<f64>>,
    pub(crate) forward: Forward,
}

fn head_name(params: &NetworkParams, i: usize) -> String {
    if i < params.n_features {
        format!("imputation head {i}")
    } else {
        format!("missingness head {}", i - params.n_features)
    }
}

pub(crate) fn forward_trace(params: &NetworkParams, x: &Array2<f64>) -> Result<Trace> {
    if x.ncols() != params.n_features {
        return Err(Error::ShapeMismatch {
            expected: (x.nrows(), params.n_features),
            found: x.dim(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network input".to_string()));
    }
    let heads: Vec<&Head> = params.heads().collect();
    let traces: Vec<Result<(Vec<Array2<f64>>, Vec<Array2<f64>>, Array1<f64>)>> = heads
        .par_iter()
        .enumerate()
        .map(|(i, head)| {
            let mut pre = Vec::with_capacity(params.depth - 1);
            let mut act = Vec::with_capacity(params.depth - 1);
            let a = x.dot(&head.input.t()) + &head.input_bias;
            act.push(a.mapv(elu));
            pre.push(a);
            for (l, (w, b)) in params.shared.iter().zip(&params.shared_bias).enumerate() {
                let a = act.last().expect("nonempty").dot(&w.t()) + b;
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "{} shared layer {}",
                        head_name(params, i),
                        l + 2
                    )));
                }
                act.push(a.mapv(elu));
                pre.push(a);
            }
            let raw = act.last().expect("nonempty").dot(&head.output) + head.output_bias;
            if pre[0].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} input layer", head_name(params, i))));
            }
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} output layer", head_name(params, i))));
            }
            Ok((pre, act, raw))
        })
        .collect();

    let n = x.nrows();
    let d = params.n_features;
    let mut imp = Array2::zeros((n, d));
    let mut miss = Array2::zeros((n, params.n_missing()));
    let mut pre_all = Vec::with_capacity(heads.len());
    let mut act_all = Vec::with_capacity(heads.len());
    let mut raw_all = Vec::with_capacity(heads.len());
    for (i, t) in traces.into_iter().enumerate() {
        let (pre, act, raw) = t?;
        if i < d {
            imp.column_mut(i).assign(&raw);
        } else {
            miss.column_mut(i - d)
                .assign(&raw.mapv(|r| sigmoid(r).clamp(PROB_FLOOR, PROB_CEIL)));
        }
        pre_all.push(pre);
        act_all.push(act);
        raw_all.push(raw);
    }
    Ok(Trace {
        pre: pre_all,
        act: act_all,
        raw: raw_all,
        forward: Forward { imp, miss },
    })
}

/// Batch forward pass.
pub fn forward(params: &NetworkParams, x: &Array2<f64>) -> Result<Forward> {
    forward_trace(params, x).map(|t| t.forward)
}

/// Single-row forward pass: `(imputations, probabilities)`.
pub fn forward_row(params: &NetworkParams, x: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let batch = x.to_owned().insert_axis(Axis(0));
    let f = forward(params, &batch)?;
    Ok((f.imp.row(0).to_owned(), f.miss.row(0).to_owned()))
}

/// Backpropagates `g_raw[i]` (gradient w.r.t. head `i`'s raw output).
pub(crate) fn backward(params: &NetworkParams, x: &Array2<f64>, trace: &Trace, g_raw: &[Array1<f64>]) -> GradientSet {
    let heads: Vec<&Head> = params.heads().collect();
    let n_shared = params.shared.len();
    let per_head: Vec<(Head, Vec<Array2<f64>>, Vec<Array1<f64>>)> = heads
        .par_iter()
        .enumerate()
        .map(|(i, head)| {
            let g = &g_raw[i];
            let pre = &trace.pre[i];
            let act = &trace.act[i];
            let last = act.last().expect("nonempty");
            let g_output = last.t().dot(g);
            let g_output_bias = g.sum();
            // dL/d(last activation) = g ⊗ output
            let mut dz = g
                .view()
                .insert_axis(Axis(1))
                .dot(&head.output.view().insert_axis(Axis(0)));
            let mut g_shared = vec![Array2::zeros((0, 0)); n_shared];
            let mut g_shared_b = vec![Array1::zeros(0); n_shared];
            for l in (0..n_shared).rev() {
                let mut da = dz;
                da.zip_mut_with(&pre[l + 1], |v, &a| *v *= elu_grad(a));
                g_shared[l] = da.t().dot(&act[l]);
                g_shared_b[l] = da.sum_axis(Axis(0));
                dz = da.dot(&params.shared[l]);
            }
            let mut da = dz;
            da.zip_mut_with(&pre[0], |v, &a| *v *= elu_grad(a));
            let mut g_input = da.t().dot(x);
            g_input.column_mut(head.masked_input).fill(0.0);
            let grad_head = Head {
                input: g_input,
                input_bias: da.sum_axis(Axis(0)),
                output: g_output,
                output_bias: g_output_bias,
                masked_input: head.masked_input,
            };
            (grad_head, g_shared, g_shared_b)
        })
        .collect();

    let mut grads = params.zeros_like();
    let d = params.n_features;
    for (i, (gh, gs, gb)) in per_head.into_iter().enumerate() {
        for l in 0..n_shared {
            grads.shared[l] += &gs[l];
            grads.shared_bias[l] += &gb[l];
        }
        if i < d {
            grads.imp[i] = gh;
        } else {
            grads.miss[i - d] = gh;
        }
    }
    GradientSet(grads)
}

/// Continuous adjacency read off the input layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyEstimate {
    /// `(d + d_S) x (d + d_S)`; entry `[k, j]` is the strength of edge `k -> j`.
    pub weights: Array2<f64>,
    pub n_features: usize,
    pub threshold: f64,
    /// Features followed by missingness indicators.
    pub labels: Vec<String>,
}

/// Default binarization threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

impl AdjacencyEstimate {
    pub fn from_weights(weights: Array2<f64>, n_features: usize, threshold: f64) -> Self {
        let m = weights.nrows();
        let labels = (0..m)
            .map(|k| {
                if k < n_features {
                    format!("X{}", k + 1)
                } else {
                    format!("R{}", k - n_features + 1)
                }
            })
            .collect();
        Self {
            weights,
            n_features,
            threshold,
            labels,
        }
    }

    /// `d x d` feature block.
    pub fn feature_block(&self) -> Array2<f64> {
        let d = self.n_features;
        self.weights.slice(ndarray::s![..d, ..d]).to_owned()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::data::write_matrix_csv(path, &self.labels, &self.weights)
    }
}

/// `B[k, j]` = L2 norm of input column `k` of head `j`.
pub fn extract_adjacency(params: &NetworkParams) -> AdjacencyEstimate {
    let d = params.n_features;
    let m = d + params.n_missing();
    let mut b = Array2::zeros((m, m));
    for (j, head) in params.heads().enumerate() {
        for k in 0..d {
            b[[k, j]] = head.input.column(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    let mut est = AdjacencyEstimate::from_weights(b, d, DEFAULT_THRESHOLD);
    for (j, &s) in params.missing.iter().enumerate() {
        est.labels[d + j] = format!("R{}", s + 1);
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn random_input(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_for(seed, 99);
        Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0))
    }

    #[test]
    fn masked_columns_start_at_zero() {
        let p = init_params(5, &[1, 3], 4, 3, 0).unwrap();
        for (j, head) in p.imp.iter().enumerate() {
            assert!(head.input.column(j).iter().all(|v| *v == 0.0));
        }
        assert!(p.miss[0].input.column(1).iter().all(|v| *v == 0.0));
        assert!(p.miss[1].input.column(3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(4, &[0, 2], 3, 4, 17).unwrap();
        let b = init_params(4, &[0, 2], 3, 4, 17).unwrap();
        let c = init_params(4, &[0, 2], 3, 4, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_count_by_shape() {
        // d = h = 4, d_S = 2, M = 3:
        // 6 heads * (16 + 4 + 4 + 1) + (16 + 4) = 170
        let p = init_params(4, &[1, 2], 4, 3, 0).unwrap();
        assert_eq!(p.num_params(), 170);
        assert_eq!(NetworkParams::expected_param_count(4, 2, 4, 3), 170);
        let p = init_params(6, &[0, 3, 5], 2, 5, 0).unwrap();
        assert_eq!(p.num_params(), NetworkParams::expected_param_count(6, 3, 2, 5));
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(init_params(3, &[], 0, 3, 0).is_err());
        assert!(init_params(3, &[], 2, 2, 0).is_err());
        assert!(init_params(3, &[3], 2, 3, 0).is_err());
    }

    #[test]
    fn zero_network_outputs() {
        let p = init_params(3, &[0, 2], 4, 3, 0).unwrap().zeros_like();
        let f = forward(&p, &random_input(5, 3, 1)).unwrap();
        assert!(f.imp.iter().all(|v| *v == 0.0));
        assert!(f.miss.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn hand_traced_forward() {
        // d = 2, h = 1, M = 3, no missing features.
        let mut p = init_params(2, &[], 1, 3, 0).unwrap().zeros_like();
        // head 0 reads x2 with weight 0.5, bias -2 -> a1 = -1 for x2 = 2
        p.imp[0].input[[0, 1]] = 0.5;
        p.imp[0].input_bias[0] = -2.0;
        p.shared[0][[0, 0]] = 2.0;
        p.shared_bias[0][0] = 0.1;
        p.imp[0].output[0] = 3.0;
        p.imp[0].output_bias = 1.0;
        // head 1 reads x1 with weight 1 -> a1 = 1
        p.imp[1].input[[0, 0]] = 1.0;
        p.imp[1].output[0] = -1.0;
        let (imp, _) = forward_row(&p, array![1.0, 2.0].view()).unwrap();
        let z1 = (-1f64).exp() - 1.0;
        let a2 = 2.0 * z1 + 0.1;
        let z2 = a2.exp() - 1.0;
        assert_abs_diff_eq!(imp[0], 3.0 * z2 + 1.0, epsilon = 1e-15);
        // second head: z1 = 1, a2 = 2.1, z2 = 2.1
        assert_abs_diff_eq!(imp[1], -2.1, epsilon = 1e-15);
    }

    #[test]
    fn own_feature_does_not_affect_head() {
        let p = init_params(4, &[1, 2], 5, 3, 7).unwrap();
        let x = random_input(1, 4, 3);
        let base = forward(&p, &x).unwrap();
        for j in 0..4 {
            let mut xp = x.clone();
            xp[[0, j]] += 1.7;
            let f = forward(&p, &xp).unwrap();
            assert_eq!(f.imp[[0, j]], base.imp[[0, j]]);
        }
        for (m, &s) in p.missing.iter().enumerate() {
            let mut xp = x.clone();
            xp[[0, s]] -= 0.9;
            assert_eq!(forward(&p, &xp).unwrap().miss[[0, m]], base.miss[[0, m]]);
        }
    }

    #[test]
    fn batch_matches_rows() {
        let p = init_params(5, &[0, 4], 6, 4, 2).unwrap();
        let x = random_input(12, 5, 8);
        let f = forward(&p, &x).unwrap();
        for i in 0..12 {
            let (imp, miss) = forward_row(&p, x.row(i)).unwrap();
            for j in 0..5 {
                assert_abs_diff_eq!(imp[j], f.imp[[i, j]], epsilon = 1e-12);
            }
            for j in 0..2 {
                assert_abs_diff_eq!(miss[j], f.miss[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_are_clamped() {
        let mut p = init_params(2, &[1], 1, 3, 0).unwrap().zeros_like();
        p.miss[0].output_bias = 1e3;
        let f = forward(&p, &Array2::zeros((1, 2))).unwrap();
        assert_eq!(f.miss[[0, 0]], PROB_CEIL);
        p.miss[0].output_bias = -1e3;
        let f = forward(&p, &Array2::zeros((1, 2))).unwrap();
        assert_eq!(f.miss[[0, 0]], PROB_FLOOR);
    }

    #[test]
    fn non_finite_layer_is_named() {
        let mut p = init_params(2, &[], 1, 3, 0).unwrap();
        p.imp[1].input_bias[0] = f64::INFINITY;
        let err = forward(&p, &Array2::zeros((1, 2))).unwrap_err();
        assert!(err.to_string().contains("imputation head 1"), "{err}");
    }

    #[test]
    fn adjacency_examples() {
        let mut p = init_params(3, &[2], 2, 3, 4).unwrap();
        let b = extract_adjacency(&p);
        assert_eq!(b.weights.dim(), (4, 4));
        for j in 0..3 {
            assert_eq!(b.weights[[j, j]], 0.0);
        }
        assert_eq!(b.weights[[2, 3]], 0.0);
        assert!(b.weights.row(3).iter().all(|v| *v == 0.0));

        p.imp[1].input.column_mut(0).assign(&array![3.0, 4.0]);
        assert_abs_diff_eq!(extract_adjacency(&p).weights[[0, 1]], 5.0, epsilon = 1e-15);

        for h in &mut p.miss {
            h.input.fill(0.0);
        }
        let b = extract_adjacency(&p);
        assert!(b.weights.column(3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = init_params(3, &[0, 1], 4, 4, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        p.save_json(&path).unwrap();
        let q = NetworkParams::load_json(&path).unwrap();
        assert_eq!(p, q);
    }
}
