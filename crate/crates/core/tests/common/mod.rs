#![allow(dead_code)]

use miracle::data::default_names;
use miracle::losses::{loss_breakdown, total_loss_and_grad, LossWeights};
use miracle::network::init_params;
use miracle::{Dataset, NetworkParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random data with a random mask (every column keeps an observed row),
/// the matching zero-filled input and randomly perturbed parameters.
pub fn instance(d: usize, hidden: usize, n: usize, seed: u64) -> (NetworkParams, Array2<f64>, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    let mut mask = Array2::from_shape_fn((n, d), |_| rng.random_bool(0.7));
    for j in 0..d {
        mask[[j % n, j]] = true;
    }
    // at least one missing cell in the first column
    mask[[(1 + d) % n, 0]] = false;
    let data = Dataset::new(x.clone(), mask.clone(), default_names(d)).unwrap();
    let input = Array2::from_shape_fn((n, d), |(i, j)| {
        if mask[[i, j]] {
            x[[i, j]]
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let mut params = init_params(d, data.missing_features(), hidden, 3, seed).unwrap();
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    params.apply_masks();
    (params, input, data)
}

/// Relative error `|g - fd| / max(|g|, |fd|)` over the whole gradient
/// vector, with central differences of step `eps`.
pub fn gradient_error(params: &NetworkParams, input: &Array2<f64>, data: &Dataset, w: &LossWeights, eps: f64) -> f64 {
    let (_, grad) = total_loss_and_grad(params, input, data, w).unwrap();
    let analytic: Vec<f64> = grad.tensors().concat();
    let total = |p: &NetworkParams| loss_breakdown(p, input, data, w).unwrap().total;
    let mut numeric = Vec::with_capacity(analytic.len());
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][k] += eps;
            plus.apply_masks();
            let mut minus = params.clone();
            minus.tensors_mut()[ti][k] -= eps;
            minus.apply_masks();
            numeric.push((total(&plus) - total(&minus)) / (2.0 * eps));
        }
    }
    let diff = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-300)
}

pub fn only_l1() -> LossWeights {
    LossWeights {
        l1: 1.0,
        beta1: 0.0,
        beta2: 0.0,
        ..LossWeights::default()
    }
}

pub fn only_r1() -> LossWeights {
    LossWeights {
        l1: 0.0,
        beta1: 1.0,
        beta2: 0.0,
        ..LossWeights::default()
    }
}

pub fn only_r2() -> LossWeights {
    LossWeights {
        l1: 0.0,
        beta1: 0.0,
        beta2: 1.0,
        ..LossWeights::default()
    }
}

/// Largest `|d out / d x|` by central differences over the coordinates each
/// head must ignore, at `x`.
pub fn masked_sensitivity(params: &NetworkParams, x: &ndarray::Array1<f64>, eps: f64) -> f64 {
    use miracle::network::forward_row;
    let mut worst = 0.0f64;
    let probe = |col: usize| {
        let mut up = x.clone();
        up[col] += eps;
        let mut down = x.clone();
        down[col] -= eps;
        (
            forward_row(params, up.view()).unwrap(),
            forward_row(params, down.view()).unwrap(),
        )
    };
    for j in 0..params.n_features {
        let ((iu, _), (id, _)) = probe(j);
        worst = worst.max(((iu[j] - id[j]) / (2.0 * eps)).abs());
    }
    for (m, &s) in params.missing.iter().enumerate() {
        let ((_, pu), (_, pd)) = probe(s);
        worst = worst.max(((pu[m] - pd[m]) / (2.0 * eps)).abs());
    }
    worst
}
