//! Confusion matrices, accuracy/precision/recall/F1 and comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::AnemiaLabel;
use crate::error::{Error, Result};

/// `K × K` counts, rows are truth and columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

/// Precision, recall and F1 for one positive class. The `*_undefined` flags
/// mark a zero denominator, in which case the value is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut cm = ConfusionMatrix::new(k);
        for (t, p) in pairs {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    /// Rows are truth.
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        let mut cm = ConfusionMatrix::new(k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "confusion matrix row",
                    expected: k,
                    found: row.len(),
                });
            }
            cm.counts[i * k..(i + 1) * k].copy_from_slice(row);
        }
        Ok(cm)
    }

    /// 4-class matrix over [`AnemiaLabel::index`].
    pub fn from_labels(pairs: impl IntoIterator<Item = (AnemiaLabel, AnemiaLabel)>) -> Self {
        let mut cm = ConfusionMatrix::new(4);
        for (t, p) in pairs {
            cm.counts[t.index() * 4 + p.index()] += 1;
        }
        cm
    }

    pub fn record(&mut self, truth: usize, prediction: usize) -> Result<()> {
        if truth >= self.k || prediction >= self.k {
            return Err(Error::DimensionMismatch {
                context: "confusion matrix class",
                expected: self.k,
                found: truth.max(prediction),
            });
        }
        self.counts[truth * self.k + prediction] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, prediction: usize) -> u64 {
        self.counts[truth * self.k + prediction]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    fn nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::EmptyInput("confusion matrix"));
        }
        Ok(())
    }

    /// Trace over total.
    pub fn accuracy(&self) -> Result<f64> {
        self.nonempty()?;
        Ok(self.correct() as f64 / self.total() as f64)
    }

    pub fn precision_recall_f1(&self, positive: usize) -> Result<Prf> {
        self.nonempty()?;
        if positive >= self.k {
            return Err(Error::DimensionMismatch {
                context: "positive class",
                expected: self.k,
                found: positive,
            });
        }
        let tp = self.get(positive, positive) as f64;
        let predicted: u64 = (0..self.k).map(|t| self.get(t, positive)).sum();
        let actual: u64 = (0..self.k).map(|p| self.get(positive, p)).sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        Ok(Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
            precision_undefined: predicted == 0,
            recall_undefined: actual == 0,
        })
    }

    pub fn per_class(&self) -> Result<Vec<Prf>> {
        (0..self.k).map(|c| self.precision_recall_f1(c)).collect()
    }

    /// Unweighted mean of the per-class values.
    pub fn macro_average(&self) -> Result<Prf> {
        let per = self.per_class()?;
        let n = per.len() as f64;
        Ok(Prf {
            precision: per.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: per.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: per.iter().map(|p| p.f1).sum::<f64>() / n,
            precision_undefined: per.iter().any(|p| p.precision_undefined),
            recall_undefined: per.iter().any(|p| p.recall_undefined),
        })
    }

    /// Merges classes through `group`, giving a `k2 × k2` matrix.
    pub fn collapse(&self, k2: usize, group: impl Fn(usize) -> usize) -> Result<Self> {
        let mut out = ConfusionMatrix::new(k2);
        for t in 0..self.k {
            for p in 0..self.k {
                let (gt, gp) = (group(t), group(p));
                if gt >= k2 || gp >= k2 {
                    return Err(Error::DimensionMismatch {
                        context: "collapsed class",
                        expected: k2,
                        found: gt.max(gp),
                    });
                }
                out.counts[gt * k2 + gp] += self.get(t, p);
            }
        }
        Ok(out)
    }

    /// 2×2 diagnosis view of a 4-class label matrix: 0 healthy, 1 anemic.
    pub fn diagnosis_view(&self) -> Result<Self> {
        if self.k != 4 {
            return Err(Error::DimensionMismatch {
                context: "label confusion matrix",
                expected: 4,
                found: self.k,
            });
        }
        self.collapse(2, |i| {
            AnemiaLabel::from_index(i).expect("label index").diagnosis() as usize
        })
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n: u64,
    /// Per-class values; for two classes the row's P/R/F1 are those of class 1,
    /// otherwise their macro average.
    pub classes: Vec<Prf>,
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub models: Vec<ModelMetrics>,
}

pub fn model_metrics(name: &str, cm: &ConfusionMatrix) -> Result<ModelMetrics> {
    let accuracy = cm.accuracy()?;
    let classes = cm.per_class()?;
    let headline = if cm.classes() == 2 {
        classes[1]
    } else {
        cm.macro_average()?
    };
    let mut flags = Vec::new();
    if headline.precision_undefined {
        flags.push("precision has a zero denominator".to_string());
    }
    if headline.recall_undefined {
        flags.push("recall has a zero denominator".to_string());
    }
    Ok(ModelMetrics {
        name: name.to_string(),
        accuracy,
        precision: headline.precision,
        recall: headline.recall,
        f1: headline.f1,
        n: cm.total(),
        classes,
        confusion: cm.rows(),
        flags,
    })
}

/// One row per model, in input order.
pub fn compare_report(entries: &[(String, ConfusionMatrix)]) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::EmptyInput("model list"));
    }
    let models = entries
        .iter()
        .map(|(name, cm)| model_metrics(name, cm))
        .collect::<Result<_>>()?;
    Ok(EvalReport { title: None, models })
}

impl EvalReport {
    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    /// Aligned text table, four decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(t) = &self.title {
            let _ = writeln!(s, "{t}");
        }
        let w = self
            .models
            .iter()
            .map(|m| m.name.len())
            .max()
            .unwrap_or(0)
            .max("model".len());
        let _ = writeln!(
            s,
            "{:<w$}  {:>5}  {:>8}  {:>9}  {:>6}  {:>6}",
            "model", "n", "accuracy", "precision", "recall", "f1"
        );
        for m in &self.models {
            let flag = if m.flags.is_empty() { "" } else { "  *" };
            let _ = writeln!(
                s,
                "{:<w$}  {:>5}  {:>8.4}  {:>9.4}  {:>6.4}  {:>6.4}{flag}",
                m.name, m.n, m.accuracy, m.precision, m.recall, m.f1
            );
        }
        for m in self.models.iter().filter(|m| !m.flags.is_empty()) {
            let _ = writeln!(s, "* {}: {} (reported as 0)", m.name, m.flags.join(", "));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
