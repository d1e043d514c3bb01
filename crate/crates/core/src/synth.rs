//! Ground-truth linear SCM generation and MCAR / MAR / MNAR amputation.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{default_names, Dataset};
use crate::error::{Error, Result};
use crate::network::AdjacencyEstimate;
use crate::util::{dense_csv, rng_for};

const EDGE_WEIGHT_MIN: f64 = 0.5;
const EDGE_WEIGHT_MAX: f64 = 2.0;

/// Lower and upper clamp for per-row missingness probabilities.
pub const PROB_CLAMP: (f64, f64) = (0.01, 0.99);

/// Linear-Gaussian structural causal model over `dim` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub dim: usize,
    /// `weights[[k, j]]` is the coefficient of edge `k -> j`.
    #[serde(with = "dense_csv")]
    pub weights: Array2<f64>,
    pub noise_std: Vec<f64>,
    /// Topological order; every edge goes from an earlier to a later entry.
    pub order: Vec<usize>,
}

impl ScmSpec {
    /// Builds a spec from an explicit weighted edge list `(from, to, weight)`.
    pub fn from_edges(dim: usize, edges: &[(usize, usize, f64)], noise_std: f64) -> Result<Self> {
        let mut weights = Array2::zeros((dim, dim));
        for &(k, j, w) in edges {
            if k >= dim || j >= dim || k == j {
                return Err(Error::InvalidArgument(format!("bad edge {k} -> {j}")));
            }
            weights[[k, j]] = w;
        }
        let order = topological_order(&weights.mapv(|w| w != 0.0))
            .ok_or_else(|| Error::InvalidArgument("edge list contains a cycle".to_string()))?;
        Ok(Self {
            dim,
            weights,
            noise_std: vec![noise_std; dim],
            order,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.dim).filter(|&k| self.weights[[k, j]] != 0.0).collect()
    }

    /// Variables without parents.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.dim).filter(|&j| self.parents(j).is_empty()).collect()
    }

    /// The most downstream variable.
    pub fn sink(&self) -> usize {
        *self.order.last().expect("dim >= 1")
    }
}

/// Kahn's algorithm; `None` if the graph has a cycle. Ties resolve to the
/// lowest index.
pub fn topological_order(adj: &Array2<bool>) -> Option<Vec<usize>> {
    let d = adj.nrows();
    let mut indeg: Vec<usize> = (0..d).map(|j| adj.column(j).iter().filter(|e| **e).count()).collect();
    let mut ready: std::collections::BTreeSet<usize> = (0..d).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for j in 0..d {
            if adj[[k, j]] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
    }
    (order.len() == d).then_some(order)
}

/// Random Erdős–Rényi DAG with `d` expected edges and weights uniform on
/// ±[0.5, 2.0].
pub fn generate_scm(d: usize, seed: u64) -> Result<ScmSpec> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2, got {d}")));
    }
    let mut rng = rng_for(seed, 1);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let p_edge = (2.0 / (d as f64 - 1.0)).min(1.0);
    let mut weights = Array2::zeros((d, d));
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < p_edge {
                let mag = rng.random_range(EDGE_WEIGHT_MIN..=EDGE_WEIGHT_MAX);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                weights[[order[a], order[b]]] = sign * mag;
            }
        }
    }
    Ok(ScmSpec {
        dim: d,
        weights,
        noise_std: vec![1.0; d],
        order,
    })
}

/// Draws `n` i.i.d. rows of `X = W^T X + E` in topological order.
pub fn sample_scm(spec: &ScmSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".to_string()));
    }
    let d = spec.dim;
    let mut rng = rng_for(seed, 2);
    let mut x = Array2::<f64>::zeros((n, d));
    for &j in &spec.order {
        let noise = Normal::new(0.0, spec.noise_std[j])
            .map_err(|e| Error::InvalidArgument(format!("noise std of X{}: {e}", j + 1)))?;
        let parents = spec.parents(j);
        for i in 0..n {
            let mut v = noise.sample(&mut rng);
            for &k in &parents {
                v += spec.weights[[k, j]] * x[[i, k]];
            }
            x[[i, j]] = v;
        }
    }
    Dataset::complete(x, default_names(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Self::Mcar),
            "mar" => Ok(Self::Mar),
            "mnar" => Ok(Self::Mnar),
            other => Err(Error::InvalidArgument(format!(
                "unknown mechanism {other:?} (expected mcar, mar, mnar)"
            ))),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mcar => "mcar",
            Self::Mar => "mar",
            Self::Mnar => "mnar",
        })
    }
}

/// How MAR scores are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarForm {
    /// Each target is driven by its own disjoint set of always-observed causes.
    #[default]
    CauseSets,
    /// Each target is driven by every preceding column, observed or not.
    Sequential,
}

fn default_target_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmputeSpec {
    pub mechanism: Mechanism,
    /// Average missing rate of each targeted feature.
    pub rate: f64,
    /// Fraction of features targeted under MAR / MNAR.
    #[serde(default = "default_target_fraction")]
    pub target_fraction: f64,
    /// Explicit targets; overrides `target_fraction`.
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    /// Explicit MAR cause sets, one per explicit target.
    #[serde(default)]
    pub causes: Option<Vec<Vec<usize>>>,
    /// Features that are never amputed (e.g. SCM roots).
    #[serde(default)]
    pub protected: Vec<usize>,
    #[serde(default)]
    pub mar_form: MarForm,
}

impl AmputeSpec {
    pub fn new(mechanism: Mechanism, rate: f64) -> Self {
        Self {
            mechanism,
            rate,
            target_fraction: default_target_fraction(),
            targets: None,
            causes: None,
            protected: Vec::new(),
            mar_form: MarForm::default(),
        }
    }

    pub fn with_protected(mut self, protected: Vec<usize>) -> Self {
        self.protected = protected;
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "missing rate must lie in (0, 1), got {}",
                self.rate
            )));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target fraction must lie in (0, 1], got {}",
                self.target_fraction
            )));
        }
        let in_range = |v: &usize| *v < d;
        if !self.protected.iter().all(in_range)
            || !self.targets.iter().flatten().all(in_range)
            || !self.causes.iter().flatten().flatten().all(in_range)
        {
            return Err(Error::InvalidArgument("feature index out of range".to_string()));
        }
        if let (Some(t), Some(c)) = (&self.targets, &self.causes) {
            if t.len() != c.len() {
                return Err(Error::InvalidArgument(
                    "one cause set is required per explicit target".to_string(),
                ));
            }
            for (target, causes) in t.iter().zip(c) {
                if causes.is_empty() || causes.iter().any(|c| t.contains(c)) || causes.contains(target) {
                    return Err(Error::InvalidArgument(format!(
                        "cause set of feature {target} must be nonempty and disjoint from the targets"
                    )));
                }
            }
        } else if self.causes.is_some() {
            return Err(Error::InvalidArgument(
                "explicit causes need explicit targets".to_string(),
            ));
        }
        Ok(())
    }
}

/// Everything drawn while amputing, for reproducibility and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmputePlan {
    pub spec: AmputeSpec,
    pub seed: u64,
    pub targets: Vec<usize>,
    /// MAR cause set per target (empty for MCAR / MNAR).
    pub causes: Vec<Vec<usize>>,
    /// Per-feature `w_j`, drawn once per dataset.
    pub w: Vec<f64>,
    /// Per-feature `b_j`, drawn once per dataset.
    pub b: Vec<f64>,
    /// Expected missing rate per target after clamping and calibration.
    pub expected_rates: Vec<f64>,
    /// Realized missing rate per target.
    pub achieved_rates: Vec<f64>,
}

/// Removes values from a complete dataset; only the mask changes.
pub fn ampute(data: &Dataset, spec: &AmputeSpec, seed: u64) -> Result<Dataset> {
    ampute_with_plan(data, spec, seed).map(|(d, _)| d)
}

pub fn ampute_with_plan(data: &Dataset, spec: &AmputeSpec, seed: u64) -> Result<(Dataset, AmputePlan)> {
    if !data.is_complete() {
        return Err(Error::InvalidArgument(
            "ampute needs a fully observed dataset".to_string(),
        ));
    }
    let (n, d) = (data.n_rows(), data.n_features());
    spec.validate(d)?;
    let mut rng = rng_for(seed, 3);
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();

    let eligible: Vec<usize> = (0..d).filter(|j| !spec.protected.contains(j)).collect();
    let (targets, causes) = match (&spec.targets, spec.mechanism) {
        (Some(t), _) => {
            let causes = match (&spec.causes, spec.mechanism, spec.mar_form) {
                (Some(c), _, _) => c.clone(),
                (None, Mechanism::Mar, MarForm::CauseSets) => {
                    let pool: Vec<usize> = (0..d).filter(|j| !t.contains(j)).collect();
                    partition_causes(&pool, t.len(), &mut rng)?
                }
                _ => vec![Vec::new(); t.len()],
            };
            (t.clone(), causes)
        }
        (None, Mechanism::Mcar) => (eligible.clone(), vec![Vec::new(); eligible.len()]),
        (None, mech) => {
            let k = ((spec.target_fraction * d as f64).round() as usize).clamp(1, eligible.len().max(1));
            if eligible.is_empty() {
                return Err(Error::InvalidArgument("every feature is protected".to_string()));
            }
            let mut pool = eligible.clone();
            pool.shuffle(&mut rng);
            let mut targets = pool[..k].to_vec();
            targets.sort_unstable();
            let causes = if mech == Mechanism::Mar && spec.mar_form == MarForm::CauseSets {
                let rest: Vec<usize> = (0..d).filter(|j| !targets.contains(j)).collect();
                partition_causes(&rest, targets.len(), &mut rng)?
            } else {
                vec![Vec::new(); targets.len()]
            };
            (targets, causes)
        }
    };

    // Scores use z-scored columns so the exponentials stay well conditioned.
    let z = zscore_columns(data.values());
    let mut mask = Array2::from_elem((n, d), true);
    let mut expected_rates = vec![0.0; targets.len()];
    let mut achieved_rates = vec![0.0; targets.len()];
    // the sequential MAR form reads the mask of earlier columns
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by_key(|&t| targets[t]);
    for t in order {
        let target = targets[t];
        let probs = match spec.mechanism {
            Mechanism::Mcar => vec![spec.rate; n],
            Mechanism::Mar => {
                let scores: Vec<f64> = (0..n)
                    .map(|i| match spec.mar_form {
                        MarForm::CauseSets if !causes[t].is_empty() => {
                            causes[t].iter().map(|&c| w[c] * z[[i, c]]).sum()
                        }
                        _ => (0..target)
                            .map(|j| if mask[[i, j]] { w[j] * z[[i, j]] } else { b[j] })
                            .sum(),
                    })
                    .collect();
                target_probabilities(&scores, spec.rate, target)?
            }
            Mechanism::Mnar => {
                let scores: Vec<f64> = (0..n).map(|i| -w[target] * z[[i, target]]).collect();
                target_probabilities(&scores, spec.rate, target)?
            }
        };
        let mut removed = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if rng.random::<f64>() < *p {
                mask[[i, target]] = false;
                removed += 1;
            }
        }
        expected_rates[t] = probs.iter().sum::<f64>() / n as f64;
        achieved_rates[t] = removed as f64 / n as f64;
    }
    for (t, &target) in targets.iter().enumerate() {
        if mask.column(target).iter().all(|m| !*m) {
            return Err(Error::InfeasibleRate {
                feature: target,
                requested: spec.rate,
                achieved: achieved_rates[t],
            });
        }
    }
    let out = data.with_mask(mask)?;
    let plan = AmputePlan {
        spec: spec.clone(),
        seed,
        targets,
        causes,
        w,
        b,
        expected_rates,
        achieved_rates,
    };
    Ok((out, plan))
}

fn target_probabilities(scores: &[f64], rate: f64, feature: usize) -> Result<Vec<f64>> {
    missing_probabilities(scores, rate).map_err(|e| match e {
        Error::InfeasibleRate {
            requested, achieved, ..
        } => Error::InfeasibleRate {
            feature,
            requested,
            achieved,
        },
        other => other,
    })
}

/// Splits `pool` into `k` disjoint nonempty random cause sets.
fn partition_causes<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if pool.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} candidate cause features cannot cover {k} targets",
            pool.len()
        )));
    }
    let mut pool = pool.to_vec();
    pool.shuffle(rng);
    let mut sets = vec![Vec::new(); k];
    for (i, f) in pool.into_iter().enumerate() {
        sets[i % k].push(f);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    Ok(sets)
}

fn zscore_columns(x: &Array2<f64>) -> Array2<f64> {
    let mut z = x.clone();
    for mut col in z.columns_mut() {
        let n = col.len() as f64;
        let m = col.sum() / n;
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        let s = if s > 0.0 { s } else { 1.0 };
        col.mapv_inplace(|v| (v - m) / s);
    }
    z
}

/// Per-row missing probabilities `rate * N * exp(s_n) / sum_l exp(s_l)`,
/// clamped to [`PROB_CLAMP`] and rescaled so their mean equals `rate`.
pub fn missing_probabilities(scores: &[f64], rate: f64) -> Result<Vec<f64>> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("amputation scores".to_string()));
    }
    let expo: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = expo.iter().sum();
    let base: Vec<f64> = expo.iter().map(|e| rate * n as f64 * e / total).collect();
    let (lo, hi) = PROB_CLAMP;
    let clamped_mean = |scale: f64| base.iter().map(|p| (scale * p).clamp(lo, hi)).sum::<f64>() / n as f64;

    let tol = 1e-12;
    let mut scale = 1.0;
    let at_one = clamped_mean(1.0);
    if (at_one - rate).abs() > tol {
        // mean is nondecreasing in scale; bracket then bisect
        let (mut a, mut b) = if at_one > rate { (0.0, 1.0) } else { (1.0, 2.0) };
        while clamped_mean(b) < rate && b < 1e300 {
            a = b;
            b *= 2.0;
        }
        if clamped_mean(b) < rate - 1e-9 || clamped_mean(a) > rate + 1e-9 {
            let achieved = if at_one > rate {
                clamped_mean(a)
            } else {
                clamped_mean(b)
            };
            return Err(Error::InfeasibleRate {
                feature: 0,
                requested: rate,
                achieved,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if clamped_mean(mid) < rate {
                a = mid;
            } else {
                b = mid;
            }
        }
        scale = 0.5 * (a + b);
    }
    Ok(base.iter().map(|p| (scale * p).clamp(lo, hi)).collect())
}

/// Fraction of estimated edge mass (feature block) that sits on true edges.
/// Returns 0 with a warning when the estimate is all zeros.
pub fn edge_recovery_score(truth: &ScmSpec, est: &AdjacencyEstimate) -> Result<f64> {
    let d = truth.dim;
    if est.n_features != d {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            found: (est.n_features, est.n_features),
        });
    }
    let mut on_edges = 0.0;
    let mut total = 0.0;
    for k in 0..d {
        for j in 0..d {
            let v = est.weights[[k, j]].abs();
            total += v;
            if truth.weights[[k, j]] != 0.0 {
                on_edges += v;
            }
        }
    }
    if total == 0.0 {
        log::warn!("edge recovery score requested for an all-zero adjacency estimate");
        return Ok(0.0);
    }
    Ok(on_edges / total)
}

/// Empirical missing rate per column.
pub fn missing_rates(data: &Dataset) -> Array1<f64> {
    let n = data.n_rows() as f64;
    Array1::from_iter(
        data.mask()
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|m| !**m).count() as f64 / n),
    )
}
