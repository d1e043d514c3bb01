//! Seed imputers: column means, k nearest neighbours, chained ridge regressions.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{observed_means, Dataset, ImputedMatrix};
use crate::error::{Error, Result};
use crate::linalg::{drop_column, fit_ridge};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineKind {
    Mean,
    Knn { k: usize },
    Chained { sweeps: usize, lambda: f64 },
}

impl BaselineKind {
    pub const NAMES: [&'static str; 3] = ["mean", "knn", "chained"];

    pub fn default_knn() -> Self {
        BaselineKind::Knn { k: 5 }
    }

    pub fn default_chained() -> Self {
        BaselineKind::Chained {
            sweeps: 10,
            lambda: 1.0,
        }
    }

    /// Parses a bare name with default settings.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "mean" => Ok(BaselineKind::Mean),
            "knn" => Ok(Self::default_knn()),
            "chained" | "mice" => Ok(Self::default_chained()),
            other => Err(Error::InvalidArgument(format!(
                "unknown baseline '{other}' (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Mean => "mean",
            BaselineKind::Knn { .. } => "knn",
            BaselineKind::Chained { .. } => "chained",
        }
    }

    pub fn impute(&self, data: &Dataset) -> Result<ImputedMatrix> {
        match *self {
            BaselineKind::Mean => impute_mean(data),
            BaselineKind::Knn { k } => impute_knn(data, k),
            BaselineKind::Chained { sweeps, lambda } => impute_chained(data, sweeps, lambda),
        }
    }
}

pub fn impute_mean(data: &Dataset) -> Result<ImputedMatrix> {
    data.check_columns_observed()?;
    let means = observed_means(data);
    let mut values = data.values().clone();
    for ((i, j), v) in values.indexed_iter_mut() {
        if !data.mask()[[i, j]] {
            *v = means[j];
        }
    }
    Ok(ImputedMatrix::new(values, "mean"))
}

/// Mean squared difference over coordinates observed in both rows.
fn partial_distance(data: &Dataset, a: usize, b: usize) -> Option<f64> {
    let mask = data.mask();
    let x = data.values();
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..data.n_features() {
        if mask[[a, j]] && mask[[b, j]] {
            sum += (x[[a, j]] - x[[b, j]]).powi(2);
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

pub fn impute_knn(data: &Dataset, k: usize) -> Result<ImputedMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".to_string()));
    }
    data.check_columns_observed()?;
    let n = data.n_rows();
    let d = data.n_features();
    let mask = data.mask();
    let x = data.values();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = x.row(i).to_vec();
            if (0..d).all(|j| mask[[i, j]]) {
                return Ok(row);
            }
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&c| c != i)
                .filter_map(|c| partial_distance(data, i, c).map(|dist| (dist, c)))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for j in 0..d {
                if mask[[i, j]] {
                    continue;
                }
                let donors: Vec<f64> = dists
                    .iter()
                    .filter(|(_, c)| mask[[*c, j]])
                    .take(k)
                    .map(|(_, c)| x[[*c, j]])
                    .collect();
                if donors.is_empty() {
                    return Err(Error::NoNeighbor { row: i, column: j });
                }
                row[j] = donors.iter().sum::<f64>() / donors.len() as f64;
            }
            Ok(row)
        })
        .collect();
    let mut values = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(ImputedMatrix::new(values, "knn"))
}

/// Mean imputation followed by `sweeps` rounds of per-column ridge regressions.
pub fn impute_chained(data: &Dataset, sweeps: usize, lambda: f64) -> Result<ImputedMatrix> {
    let mut current = impute_mean(data)?.values;
    let mask = data.mask();
    for _ in 0..sweeps {
        for &j in data.missing_features() {
            let observed: Vec<usize> = (0..data.n_rows()).filter(|&i| mask[[i, j]]).collect();
            let missing: Vec<usize> = (0..data.n_rows()).filter(|&i| !mask[[i, j]]).collect();
            let others = drop_column(current.view(), j);
            let x_obs = others.select(Axis(0), &observed);
            let y_obs = current.column(j).select(Axis(0), &observed);
            let model = fit_ridge(x_obs.view(), y_obs.view(), lambda)?;
            for &i in &missing {
                current[[i, j]] = model.predict_row(others.row(i));
            }
        }
    }
    Ok(ImputedMatrix::new(current, "chained"))
}
