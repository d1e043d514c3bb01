//! Small dense linear algebra: Cholesky solves and ridge regression.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Singular(format!("cholesky pivot {i}")));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[[i, k]] * y[k]).sum();
        y[i] = (b[i] - s) / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (y[i] - s) / l[[i, i]];
    }
    Ok(x)
}

/// Linear model `y = x . weights + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        x.dot(&self.weights) + self.intercept
    }
}

/// Closed-form ridge regression with an unpenalized intercept (via centering).
pub fn fit_ridge(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<RidgeModel> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            found: (y.len(), 1),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ridge needs n > 1, got {n}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be >= 0, got {lambda}"
        )));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.mean().expect("n > 0");
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    let mut gram = xc.t().dot(&xc);
    for i in 0..p {
        gram[[i, i]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let weights = if p == 0 {
        Array1::zeros(0)
    } else {
        cholesky_solve(&gram, &rhs).map_err(|_| Error::Singular("ridge normal equations".to_string()))?
    };
    let intercept = y_mean - x_mean.dot(&weights);
    Ok(RidgeModel { weights, intercept })
}

/// Columns of `x` except `skip`.
pub(crate) fn drop_column(x: ArrayView2<f64>, skip: usize) -> Array2<f64> {
    let keep: Vec<usize> = (0..x.ncols()).filter(|&j| j != skip).collect();
    x.select(Axis(1), &keep)
}
