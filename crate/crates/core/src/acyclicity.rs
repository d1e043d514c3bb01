//! Trace-exponential acyclicity penalty and the matrix exponential behind it.
//!
//! For a nonnegative weighted adjacency `B`, `h(B) = tr(exp(B ∘ B)) - m` is
//! zero exactly when the graph is acyclic: `tr((B ∘ B)^k)` sums the weights of
//! closed walks of length `k`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which trace function measures cyclicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcyclicityPenalty {
    /// `tr(exp(A)) - m`.
    #[default]
    Exponential,
    /// `tr((I + A / m)^m) - m`, the polynomial surrogate.
    Polynomial,
}

/// Scaled-matrix norm bound for the Taylor core.
const SCALE_TARGET: f64 = 0.5;
const MAX_TAYLOR_TERMS: usize = 40;

fn norm1(a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            found: a.dim(),
        });
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite("matrix exponential input".to_string()));
    }
    let squarings = if norm > SCALE_TARGET {
        (norm / SCALE_TARGET).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::NonFinite(format!(
            "matrix exponential overflow (norm {norm:.3e})"
        )));
    }
    let scaled = a * 2f64.powi(-squarings);

    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=MAX_TAYLOR_TERMS {
        term = term.dot(&scaled) / k as f64;
        result += &term;
        if norm1(&term) <= f64::EPSILON * 1e-2 * norm1(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "matrix exponential overflow (norm {norm:.3e})"
        )));
    }
    Ok(result)
}

/// `h(B)` with the default exponential penalty.
pub fn h_of(b: &Array2<f64>) -> Result<f64> {
    h_and_grad(b, AcyclicityPenalty::Exponential).map(|(h, _)| h)
}

/// `h(B)` and `dh/dB`.
pub fn h_and_grad(b: &Array2<f64>, penalty: AcyclicityPenalty) -> Result<(f64, Array2<f64>)> {
    let m = b.nrows();
    if b.ncols() != m {
        return Err(Error::ShapeMismatch {
            expected: (m, m),
            found: b.dim(),
        });
    }
    let sq = b.mapv(|v| v * v);
    let (trace, d_sq) = match penalty {
        AcyclicityPenalty::Exponential => {
            let e = expm(&sq)?;
            (e.diag().sum(), e.t().to_owned())
        }
        AcyclicityPenalty::Polynomial => {
            if m == 0 {
                return Ok((0.0, Array2::zeros((0, 0))));
            }
            let base = Array2::<f64>::eye(m) + &sq / m as f64;
            let mut pow = Array2::<f64>::eye(m);
            for _ in 0..(m - 1) {
                pow = pow.dot(&base);
            }
            let full = pow.dot(&base);
            if full.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("polynomial acyclicity penalty".to_string()));
            }
            (full.diag().sum(), pow.t().to_owned())
        }
    };
    let h = trace - m as f64;
    let grad = d_sq * &b.mapv(|v| 2.0 * v);
    Ok((h, grad))
}

/// Depth-first cycle check on a boolean adjacency (`adj[[k, j]]` = edge k -> j).
pub fn is_acyclic(adj: &Array2<bool>) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = adj.nrows();
    let mut marks = vec![Mark::New; n];
    for start in 0..n {
        if marks[start] != Mark::New {
            continue;
        }
        // explicit stack of (node, next child to visit)
        let mut stack = vec![(start, 0usize)];
        marks[start] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < n {
                let child = *next;
                *next += 1;
                if adj[[node, child]] {
                    match marks[child] {
                        Mark::Active => return false,
                        Mark::New => {
                            marks[child] = Mark::Active;
                            stack.push((child, 0));
                        }
                        Mark::Done => {}
                    }
                }
            } else {
                marks[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn exp_of_zero_is_identity() {
        let e = expm(&Array2::zeros((3, 3))).unwrap();
        assert_eq!(e, Array2::<f64>::eye(3));
    }

    #[test]
    fn exp_of_diagonal() {
        let a = array![[1.0, 0.0], [0.0, -2.0]];
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[[0, 0]], 1f64.exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[[1, 1]], (-2f64).exp(), epsilon = 1e-14);
        assert_eq!(e[[0, 1]], 0.0);
    }

    #[test]
    fn exp_of_large_rotation_generator() {
        // exp([[0, t], [-t, 0]]) = [[cos t, sin t], [-sin t, cos t]]
        let t = 7.3;
        let e = expm(&array![[0.0, t], [-t, 0.0]]).unwrap();
        assert_abs_diff_eq!(e[[0, 0]], t.cos(), epsilon = 1e-10);
        assert_abs_diff_eq!(e[[0, 1]], t.sin(), epsilon = 1e-10);
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_of(&Array2::zeros((4, 4))).unwrap(), 0.0);
        assert_eq!(h_of(&array![[0.0, 1.0], [0.0, 0.0]]).unwrap(), 0.0);
        let h = h_of(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(h, 2.0 * 1f64.cosh() - 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 1.086161, epsilon = 1e-6);
    }

    #[test]
    fn overflow_is_reported() {
        let b = array![[0.0, 1e200], [1e200, 0.0]];
        assert!(matches!(h_of(&b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = array![[0.0, 0.7, 0.2], [0.4, 0.0, 0.9], [0.3, 0.5, 0.0]];
        for penalty in [AcyclicityPenalty::Exponential, AcyclicityPenalty::Polynomial] {
            let (_, g) = h_and_grad(&b, penalty).unwrap();
            let eps = 1e-6;
            for k in 0..3 {
                for j in 0..3 {
                    let mut bp = b.clone();
                    bp[[k, j]] += eps;
                    let mut bm = b.clone();
                    bm[[k, j]] -= eps;
                    let fd = (h_and_grad(&bp, penalty).unwrap().0 - h_and_grad(&bm, penalty).unwrap().0) / (2.0 * eps);
                    assert_abs_diff_eq!(g[[k, j]], fd, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn dfs_cycle_detection() {
        let mut adj = Array2::from_elem((4, 4), false);
        adj[[0, 1]] = true;
        adj[[1, 2]] = true;
        adj[[3, 2]] = true;
        assert!(is_acyclic(&adj));
        adj[[2, 0]] = true;
        assert!(!is_acyclic(&adj));
        let mut selfloop = Array2::from_elem((2, 2), false);
        selfloop[[1, 1]] = true;
        assert!(!is_acyclic(&selfloop));
    }

    proptest! {
        #[test]
        fn triangular_matrices_have_zero_h(m in 2usize..9, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let perm = {
                use rand::seq::SliceRandom;
                let mut p: Vec<usize> = (0..m).collect();
                p.shuffle(&mut rng);
                p
            };
            let mut b = Array2::zeros((m, m));
            for a in 0..m {
                for c in (a + 1)..m {
                    b[[perm[a], perm[c]]] = rng.random_range(0.0..3.0);
                }
            }
            prop_assert!(h_of(&b).unwrap().abs() < 1e-10);
        }

        #[test]
        fn cycles_have_positive_h(m in 2usize..7, w in 0.5f64..2.0) {
            let mut b = Array2::zeros((m, m));
            for k in 0..m {
                b[[k, (k + 1) % m]] = w;
            }
            prop_assert!(h_of(&b).unwrap() > 0.0);
        }
    }
}
