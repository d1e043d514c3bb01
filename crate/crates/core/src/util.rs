use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for a (seed, purpose) pair.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Serializes a matrix as dense CSV text (rows on lines, comma separated).
pub mod dense_csv {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn to_string(x: &Array2<f64>) -> String {
        x.outer_iter()
            .map(|row| {
                row.iter()
                    .map(|v| crate::data::format_value(*v))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn from_str(text: &str) -> Result<Array2<f64>, String> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err("ragged matrix".into());
        }
        Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
    }

    pub fn serialize<S: Serializer>(x: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let text = String::deserialize(d)?;
        from_str(&text).map_err(D::Error::custom)
    }
}
