use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureSchema};

/// Per-feature standardization fitted on a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub schema_id: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose corpus variance was zero; their std is stored as 1.
    pub constant: Vec<bool>,
    /// Features copied through unchanged.
    pub passthrough: Vec<bool>,
}

impl FeatureNormalizer {
    /// Fit mean and population std of every column of `rows`.
    pub fn fit<'a, I>(schema: &FeatureSchema, rows: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let d = schema.len();
        let mut n = 0usize;
        let mut sum = vec![0.0; d];
        let mut rows_kept: Vec<&[f64]> = Vec::new();
        for row in rows {
            if row.len() != d {
                return Err(FeatureError::Length { got: row.len(), expected: d });
            }
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            rows_kept.push(row);
            n += 1;
        }
        if n < 2 {
            return Err(FeatureError::CorpusTooSmall(n));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; d];
        for row in &rows_kept {
            for k in 0..d {
                var[k] += (row[k] - mean[k]).powi(2);
            }
        }
        let mut std = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for k in 0..d {
            let s = (var[k] / n as f64).sqrt();
            let flat = !(s > 1e-12 * (1.0 + mean[k].abs()));
            if flat && !schema.passthrough[k] {
                log::debug!("feature {} is constant over the corpus", schema.names[k]);
            }
            constant.push(flat);
            std.push(if flat { 1.0 } else { s });
        }
        let mut out = Self {
            schema_id: schema.id.clone(),
            mean,
            std,
            constant,
            passthrough: schema.passthrough.clone(),
        };
        for k in 0..d {
            if out.passthrough[k] {
                out.mean[k] = 0.0;
                out.std[k] = 1.0;
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if v.len() != self.len() {
            return Err(FeatureError::Length { got: v.len(), expected: self.len() });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn apply_in_place(&self, v: &mut [f64]) {
        for (x, (m, s)) in v.iter_mut().zip(self.mean.iter().zip(&self.std)) {
            *x = (*x - m) / s;
        }
    }
}
