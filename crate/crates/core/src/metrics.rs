//! Confusion matrices and precision / recall / F1 / accuracy.
//!
//! Binary scores are computed for the positive class. Weighted scores average
//! one-vs-rest per-class scores by gold support. Any 0/0 ratio is 0.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            k,
            counts: counts.into_iter().flatten().collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn support(&self) -> Vec<u64> {
        (0..self.k)
            .map(|g| (0..self.k).map(|p| self.get(g, p)).sum())
            .collect()
    }

    fn predicted(&self, c: usize) -> u64 {
        (0..self.k).map(|g| self.get(g, c)).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }
}

pub fn confusion(
    gold: &IndexMap<String, usize>,
    pred: &IndexMap<String, usize>,
    k: usize,
) -> Result<ConfusionMatrix> {
    if gold.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    if gold.len() != pred.len() {
        return Err(Error::IdMismatch(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut counts = vec![0u64; k * k];
    for (id, &g) in gold {
        let &p = pred
            .get(id)
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for {id:?}")))?;
        if g >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "class out of range for {id:?} (gold {g}, predicted {p}, k {k})"
            )));
        }
        counts[g * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Binary,
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub support: Vec<u64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn score(
    cm: &ConfusionMatrix,
    averaging: Averaging,
    positive_class: Option<usize>,
) -> Result<MetricReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let support = cm.support();
    let accuracy = ratio(cm.trace(), n);
    let (precision, recall, f1) = match averaging {
        Averaging::Binary => {
            let pos = positive_class.ok_or_else(|| {
                Error::InvalidArgument("binary scores need a positive class".into())
            })?;
            if cm.n_classes() != 2 || pos >= 2 {
                return Err(Error::InvalidArgument(
                    "binary scores need two classes".into(),
                ));
            }
            let tp = cm.get(pos, pos);
            let p = ratio(tp, cm.predicted(pos));
            let r = ratio(tp, support[pos]);
            (p, r, harmonic(p, r))
        }
        Averaging::Weighted => {
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for (c, &sup) in support.iter().enumerate() {
                let tp = cm.get(c, c);
                let pc = ratio(tp, cm.predicted(c));
                let rc = ratio(tp, sup);
                let w = ratio(sup, n);
                p += w * pc;
                r += w * rc;
                f += w * harmonic(pc, rc);
            }
            (p, r, f)
        }
    };
    Ok(MetricReport {
        averaging,
        precision,
        recall,
        f1,
        accuracy,
        support,
    })
}

/// Serialized form: percentages rounded to four decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub support: Vec<u64>,
}

pub fn percent(v: f64) -> f64 {
    (v * 100.0 * 1e4).round() / 1e4
}

impl MetricReport {
    pub fn to_json_repr(&self) -> ReportJson {
        ReportJson {
            averaging: self.averaging,
            precision: percent(self.precision),
            recall: percent(self.recall),
            f1: percent(self.f1),
            accuracy: percent(self.accuracy),
            support: self.support.clone(),
        }
    }
}
