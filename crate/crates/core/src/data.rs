//! Datasets with missingness masks, standardization, and CSV I/O.
//!
//! Missing cells are stored as `NaN` in [`Dataset::values`]; the boolean mask
//! is the source of truth for what is observed. Any arithmetic that reads a
//! masked cell by accident propagates `NaN` and trips the finiteness checks
//! downstream.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tokens treated as missing when reading CSV.
pub const DEFAULT_MISSING_TOKENS: [&str; 2] = ["", "NA"];

#[derive(Debug, Clone)]
pub struct Dataset {
    values: Array2<f64>,
    mask: Array2<bool>,
    feature_names: Vec<String>,
    missing_features: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset, overwriting unobserved cells with the `NaN` sentinel.
    pub fn new(mut values: Array2<f64>, mask: Array2<bool>, feature_names: Vec<String>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::ShapeMismatch {
                expected: values.dim(),
                found: mask.dim(),
            });
        }
        if feature_names.len() != values.ncols() {
            return Err(Error::InvalidArgument(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                values.ncols()
            )));
        }
        for ((i, j), v) in values.indexed_iter_mut() {
            if mask[[i, j]] {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "observed cell ({i}, {}) of dataset",
                        feature_names[j]
                    )));
                }
            } else {
                *v = f64::NAN;
            }
        }
        let missing_features = missing_columns(&mask);
        Ok(Self {
            values,
            mask,
            feature_names,
            missing_features,
        })
    }

    /// A fully observed dataset.
    pub fn complete(values: Array2<f64>, feature_names: Vec<String>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::new(values, mask, feature_names)
    }

    /// Same values, new mask. Cells newly marked missing become `NaN`.
    pub fn with_mask(&self, mask: Array2<bool>) -> Result<Self> {
        if mask.dim() != self.mask.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.mask.dim(),
                found: mask.dim(),
            });
        }
        if let Some(((i, j), _)) = mask.indexed_iter().find(|(ix, &m)| m && !self.mask[*ix]) {
            return Err(Error::InvalidArgument(format!(
                "cell ({i}, {j}) is missing in the source and cannot be revealed"
            )));
        }
        Self::new(self.values.clone(), mask, self.feature_names.clone())
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Ordered indices of columns with at least one missing cell.
    pub fn missing_features(&self) -> &[usize] {
        &self.missing_features
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[[row, col]]
    }

    pub fn n_missing(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_features.is_empty()
    }

    /// Observed value, or `None` for a missing cell.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[[row, col]].then(|| self.values[[row, col]])
    }

    /// Mask as a 0/1 float matrix.
    pub fn mask_f64(&self) -> Array2<f64> {
        self.mask.mapv(|m| if m { 1.0 } else { 0.0 })
    }

    /// Observed entries of one column.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        self.values
            .column(col)
            .iter()
            .zip(self.mask.column(col))
            .filter_map(|(v, m)| m.then_some(*v))
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select(Axis(0), rows);
        let mask = self.mask.select(Axis(0), rows);
        Self::new(values, mask, self.feature_names.clone())
    }

    /// Row subset that keeps the parent's missing-feature layout, so a
    /// network built for the full data applies to the batch.
    pub(crate) fn row_batch(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            mask: self.mask.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            missing_features: self.missing_features.clone(),
        }
    }

    pub(crate) fn check_columns_observed(&self) -> Result<()> {
        for j in 0..self.n_features() {
            if !self.mask.column(j).iter().any(|m| *m) {
                return Err(Error::FullyMissingColumn {
                    column: self.feature_names[j].clone(),
                });
            }
        }
        Ok(())
    }
}

impl PartialEq for Dataset {
    /// Equality over names, mask, and observed values; sentinels are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.feature_names == other.feature_names
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .zip(self.mask.iter())
                .all(|((a, b), m)| !*m || a.to_bits() == b.to_bits())
    }
}

fn missing_columns(mask: &Array2<bool>) -> Vec<usize> {
    (0..mask.ncols())
        .filter(|&j| mask.column(j).iter().any(|m| !*m))
        .collect()
}

/// Default feature names `X1..Xd`.
pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("X{j}")).collect()
}

/// A complete matrix produced by an imputer.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMatrix {
    pub values: Array2<f64>,
    pub provenance: String,
}

impl ImputedMatrix {
    pub fn new(values: Array2<f64>, provenance: impl Into<String>) -> Self {
        Self {
            values,
            provenance: provenance.into(),
        }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }
}

/// Observed entries from `data`, `xhat` everywhere else.
pub fn merge_imputation(data: &Dataset, xhat: &Array2<f64>) -> Result<ImputedMatrix> {
    if data.values.dim() != xhat.dim() {
        return Err(Error::ShapeMismatch {
            expected: data.values.dim(),
            found: xhat.dim(),
        });
    }
    let mut values = xhat.clone();
    ndarray::Zip::from(&mut values)
        .and(&data.values)
        .and(&data.mask)
        .for_each(|out, &v, &m| {
            if m {
                *out = v;
            }
        });
    Ok(ImputedMatrix {
        values,
        provenance: "merged".to_string(),
    })
}

/// Per-column location and scale over observed entries (population variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let d = data.n_features();
        let mut means = Vec::with_capacity(d);
        let mut stds = Vec::with_capacity(d);
        for j in 0..d {
            let obs = data.observed_column(j);
            if obs.is_empty() {
                return Err(Error::FullyMissingColumn {
                    column: data.feature_names[j].clone(),
                });
            }
            let n = obs.len() as f64;
            let mean = obs.iter().sum::<f64>() / n;
            let var = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if obs.len() < 2 || !(std > 0.0) || std <= 1e-12 * mean.abs().max(1.0) {
                return Err(Error::ZeroVariance {
                    column: data.feature_names[j].clone(),
                });
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Self { means, stds })
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let values = self.transform_matrix(&data.values)?;
        Dataset::new(values, data.mask.clone(), data.feature_names.clone())
    }

    pub fn transform_matrix(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform_matrix(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if d != self.means.len() {
            return Err(Error::ShapeMismatch {
                expected: (0, self.means.len()),
                found: (0, d),
            });
        }
        Ok(())
    }
}

/// Z-scores every column using statistics from its observed entries.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let st = Standardizer::fit(data)?;
    Ok((st.transform(data)?, st))
}

/// Seeded row partition; `ratio` is the training fraction.
pub fn split_train_test(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let (train, test) = split_indices(data.n_rows(), ratio, seed)?;
    Ok((data.select_rows(&train)?, data.select_rows(&test)?))
}

/// Row indices of a seeded train/test partition, each side sorted.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (n as f64 * ratio).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::EmptySplit {
            train: n_train,
            test: n.saturating_sub(n_train),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Reads a numeric CSV with a header row. Empty cells, `NA`, and
/// `missing_token` (when given) are treated as missing.
pub fn load_csv(path: impl AsRef<Path>, missing_token: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, missing_token)
}

pub fn read_csv<R: Read>(reader: R, missing_token: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let d = names.len();
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 columns, found {d}")));
    }
    let mut flat = Vec::new();
    let mut mask = Vec::new();
    let mut n = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            let missing = DEFAULT_MISSING_TOKENS.contains(&cell) || missing_token == Some(cell);
            if missing {
                flat.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: row + 1,
                    column: names[j].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: names[j].clone(),
                        value: cell.to_string(),
                    });
                }
                flat.push(v);
                mask.push(true);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let values = Array2::from_shape_vec((n, d), flat).expect("csv reader enforces equal row lengths");
    let mask = Array2::from_shape_vec((n, d), mask).expect("same shape as values");
    let data = Dataset::new(values, mask, names)?;
    data.check_columns_observed()?;
    Ok(data)
}

/// Writes observed values; missing cells become empty fields.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(file, data)
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&data.feature_names)?;
    for (vals, mask) in data.values.outer_iter().zip(data.mask.outer_iter()) {
        let row: Vec<String> = vals
            .iter()
            .zip(mask.iter())
            .map(|(v, m)| if *m { format_value(*v) } else { String::new() })
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a dense matrix with the given header.
pub fn write_matrix_csv(path: impl AsRef<Path>, names: &[String], x: &Array2<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(names)?;
    for row in x.outer_iter() {
        wtr.write_record(row.iter().map(|v| format_value(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the mask as 0/1 with the dataset's header.
pub fn write_mask_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(&data.feature_names)?;
    for row in data.mask.outer_iter() {
        wtr.write_record(row.iter().map(|m| if *m { "1" } else { "0" }))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_mask_csv(path: impl AsRef<Path>) -> Result<Array2<bool>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let d = rdr.headers()?.len();
    let mut flat = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            flat.push(match cell.trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: j.to_string(),
                        value: other.to_string(),
                    })
                }
            });
        }
    }
    let n = flat.len() / d.max(1);
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(Array2::from_shape_vec((n, d), flat).expect("rectangular csv"))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Per-column means over observed entries.
pub(crate) fn observed_means(data: &Dataset) -> Array1<f64> {
    Array1::from_shape_fn(data.n_features(), |j| {
        let col = data.observed_column(j);
        col.iter().sum::<f64>() / col.len().max(1) as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), None)
    }

    #[test]
    fn one_empty_cell_gives_one_zero_in_mask() {
        let d = parse("a,b\n1,2\n3,\n5,6\n").unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.mask().iter().filter(|m| !**m).count(), 1);
        assert!(!d.is_observed(1, 1));
        assert!(d.values()[[1, 1]].is_nan());
        assert_eq!(d.missing_features(), &[1]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        assert!(matches!(parse("a,b\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn all_na_column_is_named() {
        let err = parse("a,b\n1,NA\n2,NA\n").unwrap_err();
        match err {
            Error::FullyMissingColumn { column } => assert_eq!(column, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let err = parse("a,b\n1,2\n3,x\n").unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "x"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_missing_token() {
        let d = read_csv("a,b\n1,?\n2,3\n".as_bytes(), Some("?")).unwrap();
        assert!(!d.is_observed(0, 1));
    }

    #[test]
    fn single_column_rejected() {
        assert!(matches!(parse("a\n1\n"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn standardize_three_points() {
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, 5.0]];
        let d = Dataset::complete(x, default_names(2)).unwrap();
        let (z, st) = standardize(&d).unwrap();
        // population std of {1,2,3} is sqrt(2/3)
        let s = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(st.stds[0], s, epsilon = 1e-15);
        assert_abs_diff_eq!(z.values()[[0, 0]], -1.0 / s, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[0, 0]], -1.224744871391589, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[1, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[2, 0]], 1.224744871391589, epsilon = 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = array![[1.0, 4.0], [2.0, -1.0], [7.0, 0.5], [0.0, 2.0]];
        let d = Dataset::complete(x, default_names(2)).unwrap();
        let (z, _) = standardize(&d).unwrap();
        let (zz, _) = standardize(&z).unwrap();
        for (a, b) in z.values().iter().zip(zz.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_column_rejected() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]];
        let d = Dataset::complete(x, vec!["c".into(), "v".into()]).unwrap();
        match standardize(&d).unwrap_err() {
            Error::ZeroVariance { column } => assert_eq!(column, "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn standardizer_ignores_missing_cells() {
        let x = array![[1.0, 0.0], [1000.0, 1.0], [3.0, 5.0]];
        let mask = array![[true, true], [false, true], [true, true]];
        let d = Dataset::new(x, mask, default_names(2)).unwrap();
        let st = Standardizer::fit(&d).unwrap();
        assert_abs_diff_eq!(st.means[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.stds[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn merge_identities() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let xhat = array![[9.0, 9.0], [9.0, 9.0]];
        let full = Dataset::complete(x.clone(), default_names(2)).unwrap();
        assert_eq!(merge_imputation(&full, &xhat).unwrap().values, x);

        let none = full.with_mask(Array2::from_elem((2, 2), false)).unwrap();
        assert_eq!(merge_imputation(&none, &xhat).unwrap().values, xhat);

        let mixed = full.with_mask(array![[true, false], [true, true]]).unwrap();
        let merged = merge_imputation(&mixed, &xhat).unwrap();
        assert_eq!(merged.values, array![[1.0, 9.0], [3.0, 4.0]]);
    }

    #[test]
    fn merge_shape_mismatch() {
        let d = Dataset::complete(array![[1.0, 2.0]], default_names(2)).unwrap();
        let err = merge_imputation(&d, &Array2::zeros((2, 2))).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
        let d = Dataset::complete(x, default_names(2)).unwrap();
        let (a, b) = split_train_test(&d, 0.8, 7).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (8, 2));
        let (a2, b2) = split_train_test(&d, 0.8, 7).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut rows: Vec<f64> = a
            .values()
            .column(0)
            .iter()
            .chain(b.values().column(0))
            .copied()
            .collect();
        rows.sort_by(f64::total_cmp);
        assert_eq!(rows, (0..10).map(|i| (2 * i) as f64).collect::<Vec<_>>());
        assert!(split_train_test(&d, 1.0, 7).is_err());
        assert!(split_train_test(&d, 0.0, 7).is_err());
    }

    #[test]
    fn split_recomputes_missing_features() {
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64);
        let mut mask = Array2::from_elem((4, 2), true);
        mask[[0, 1]] = false;
        let d = Dataset::new(x, mask, default_names(2)).unwrap();
        let (train, test) = split_train_test(&d, 0.5, 3).unwrap();
        for part in [&train, &test] {
            let has_missing = part.mask().column(1).iter().any(|m| !*m);
            assert_eq!(part.missing_features().contains(&1), has_missing);
        }
    }

    #[test]
    fn csv_round_trip_is_fixed_point() {
        let text = "a,b,c\n0.1,,3\n-2.5e-7,4,NA\n1e300,0.30000000000000004,7\n";
        let d = parse(text).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let d2 = read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(d.mask(), d2.mask());
        for (a, b) in d.values().iter().zip(d2.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        let mut buf2 = Vec::new();
        write_dataset(&mut buf2, &d2).unwrap();
        assert_eq!(buf, buf2);
    }
}
