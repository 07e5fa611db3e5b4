//! Greedy weighted ensembling of per-model class probabilities.
//!
//! Members are added to a bag one at a time, with replacement, always taking
//! the member whose addition gives the best validation accuracy. The bag kept
//! is the one after the last round reaching the highest accuracy seen, so it
//! never scores below the best single member. A member's weight is its share
//! of the selections in that bag.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::gbdt::argmax;
use crate::{Error, Result};

pub const DEFAULT_ROUNDS: usize = 25;
const ROW_SUM_TOL: f64 = 1e-6;

/// One model's class probabilities, keyed by example id in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model_name: String,
    pub rows: IndexMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    probs: Vec<f64>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>, rows: IndexMap<String, Vec<f64>>) -> Result<Self> {
        let set = PredictionSet {
            model_name: model_name.into(),
            rows,
        };
        set.validate()?;
        Ok(set)
    }

    /// Builds a set from parallel id and row lists; ids must be unique.
    pub fn from_rows(
        model_name: impl Into<String>,
        ids: &[String],
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let mut map = IndexMap::with_capacity(ids.len());
        for (id, row) in ids.iter().zip(rows) {
            if map.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Self::new(model_name, map)
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_classes();
        for (id, row) in &self.rows {
            if row.len() != k || k == 0 {
                return Err(Error::Shape(format!(
                    "{}: row {id:?} has {} classes, expected {k}",
                    self.model_name,
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::NonFinite(format!("{}: row {id:?}", self.model_name)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "{}: row {id:?} sums to {sum}",
                    self.model_name
                )));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.rows.first().map_or(0, |(_, r)| r.len())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn predicted_classes(&self) -> IndexMap<String, usize> {
        self.rows
            .iter()
            .map(|(id, row)| (id.clone(), argmax(row)))
            .collect()
    }

    /// Restricts the set to `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let mut rows = IndexMap::with_capacity(ids.len());
        for id in ids {
            let row = self.rows.get(id).ok_or_else(|| {
                Error::IdMismatch(format!("{} has no prediction for {id:?}", self.model_name))
            })?;
            rows.insert(id.clone(), row.clone());
        }
        Ok(PredictionSet {
            model_name: self.model_name.clone(),
            rows,
        })
    }

    /// Reads prediction JSONL; the model is named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::load_named(path, name)
    }

    pub fn load_named(path: impl AsRef<Path>, name: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = IndexMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: PredictionRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e))?;
            if rows.insert(rec.id.clone(), rec.probs).is_some() {
                return Err(Error::parse(path, i + 1, Error::DuplicateId(rec.id)));
            }
        }
        let set = PredictionSet {
            model_name: name.into(),
            rows,
        };
        set.validate().map_err(|e| Error::parse(path, 0, e))?;
        Ok(set)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for (id, probs) in &self.rows {
            serde_json::to_writer(
                &mut out,
                &PredictionRecord {
                    id: id.clone(),
                    probs: probs.clone(),
                },
            )
            .map_err(|e| io(e.into()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    /// Rounds in the kept bag; weights are selection counts over this.
    pub rounds: usize,
    /// `(model_name, weight)` in input model order.
    pub members: Vec<(String, f64)>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    rounds: usize,
    members: Vec<MemberWeight>,
}

#[derive(Serialize, Deserialize)]
struct MemberWeight {
    model: String,
    weight: f64,
}

impl EnsembleWeights {
    pub fn weight_of(&self, model: &str) -> Option<f64> {
        self.members
            .iter()
            .find(|(m, _)| m == model)
            .map(|(_, w)| *w)
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            rounds: self.rounds,
            members: self
                .members
                .iter()
                .map(|(m, w)| MemberWeight {
                    model: m.clone(),
                    weight: *w,
                })
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("weights serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: WeightsFile =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))?;
        if file
            .members
            .iter()
            .any(|m| !(m.weight >= 0.0 && m.weight.is_finite()))
        {
            return Err(Error::parse(
                path,
                1,
                "weights must be finite and non-negative",
            ));
        }
        Ok(EnsembleWeights {
            rounds: file.rounds,
            members: file
                .members
                .into_iter()
                .map(|m| (m.model, m.weight))
                .collect(),
        })
    }
}

/// Dense `n x k` probabilities of each set, rows ordered like `ids`.
fn align(preds: &[PredictionSet], ids: &[&String]) -> Result<(usize, Vec<Vec<f64>>)> {
    let k = preds[0].n_classes();
    let mut out = Vec::with_capacity(preds.len());
    for set in preds {
        if set.n_classes() != k {
            return Err(Error::Shape(format!(
                "{} has {} classes, expected {k}",
                set.model_name,
                set.n_classes()
            )));
        }
        if set.len() != ids.len() {
            return Err(Error::IdMismatch(format!(
                "{} covers {} examples, expected {}",
                set.model_name,
                set.len(),
                ids.len()
            )));
        }
        let mut dense = Vec::with_capacity(ids.len() * k);
        for id in ids {
            let row = set.rows.get(*id).ok_or_else(|| {
                Error::IdMismatch(format!("{} has no prediction for {id:?}", set.model_name))
            })?;
            dense.extend_from_slice(row);
        }
        out.push(dense);
    }
    Ok((k, out))
}

/// `sum_m w_m * P_m`, accumulated in member order.
fn mix(dense: &[Vec<f64>], weights: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (p, &w) in dense.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    out
}

fn accuracy(mixed: &[f64], k: usize, gold: &[usize]) -> usize {
    mixed
        .chunks(k)
        .zip(gold)
        .filter(|(row, &g)| argmax(row) == g)
        .count()
}

fn count_weights(counts: &[usize], total: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

pub fn fit_weights(
    preds: &[PredictionSet],
    gold: &IndexMap<String, usize>,
    rounds: usize,
) -> Result<EnsembleWeights> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no prediction sets".into()));
    }
    if rounds < 1 {
        return Err(Error::InvalidArgument(
            "ensemble rounds must be at least 1".into(),
        ));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("empty gold set".into()));
    }
    let ids: Vec<&String> = gold.keys().collect();
    let (k, dense) = align(preds, &ids)?;
    let labels: Vec<usize> = gold.values().copied().collect();
    if let Some(bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidArgument(format!(
            "gold class {bad} out of range"
        )));
    }

    let len = ids.len() * k;
    let mut counts = vec![0usize; preds.len()];
    let mut kept = (0usize, Vec::new(), 0usize);
    for round in 1..=rounds {
        let scores = crate::par::map_range(preds.len(), |j| {
            let mut trial = counts.clone();
            trial[j] += 1;
            accuracy(&mix(&dense, &count_weights(&trial, round), len), k, &labels)
        });
        let mut best = 0;
        for (j, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = j;
            }
        }
        counts[best] += 1;
        if scores[best] >= kept.0 {
            kept = (scores[best], counts.clone(), round);
        }
    }
    let (_, counts, used) = kept;
    let weights = count_weights(&counts, used);
    Ok(EnsembleWeights {
        rounds: used,
        members: preds
            .iter()
            .zip(weights)
            .map(|(p, w)| (p.model_name.clone(), w))
            .collect(),
    })
}

/// Weighted mean of the members' rows, in the id order of the first set.
pub fn ensemble_predict(
    preds: &[PredictionSet],
    weights: &EnsembleWeights,
) -> Result<PredictionSet> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no prediction sets".into()));
    }
    if weights.members.len() != preds.len() {
        return Err(Error::IdMismatch(format!(
            "{} weights for {} prediction sets",
            weights.members.len(),
            preds.len()
        )));
    }
    let w: Vec<f64> = preds
        .iter()
        .map(|p| {
            weights
                .weight_of(&p.model_name)
                .ok_or_else(|| Error::IdMismatch(format!("no weight for model {:?}", p.model_name)))
        })
        .collect::<Result<_>>()?;
    let ids: Vec<&String> = preds[0].rows.keys().collect();
    let (k, dense) = align(preds, &ids)?;
    let mixed = mix(&dense, &w, ids.len() * k);
    let rows = ids
        .iter()
        .zip(mixed.chunks(k))
        .map(|(id, row)| ((*id).clone(), row.to_vec()))
        .collect();
    PredictionSet::new("ensemble", rows)
}

/// Fraction of `gold` whose argmax prediction in `set` is correct.
pub fn set_accuracy(set: &PredictionSet, gold: &IndexMap<String, usize>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::InvalidArgument("empty gold set".into()));
    }
    let mut hits = 0;
    for (id, &g) in gold {
        let row = set
            .rows
            .get(id)
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for {id:?}")))?;
        hits += usize::from(argmax(row) == g);
    }
    Ok(hits as f64 / gold.len() as f64)
}
