use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature min-max map onto [-1, +1], fitted on training vectors.
///
/// The map is unclamped: values outside the fitted range extrapolate linearly.
/// A constant feature (min == max) maps every input to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("normalizer training data"))?;
        let width = first.len();
        let mut min = first.clone();
        let mut max = first.clone();
        for row in &rows[1..] {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    context: "normalizer fit",
                    expected: width,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.width() {
            return Err(Error::DimensionMismatch {
                context: "normalizer",
                expected: self.width(),
                found: len,
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    2.0 * (x - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn invert(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&y, (&lo, &hi))| {
                if hi > lo {
                    lo + (y + 1.0) * (hi - lo) / 2.0
                } else {
                    lo
                }
            })
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}
