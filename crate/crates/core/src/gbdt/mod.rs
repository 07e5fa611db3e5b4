//! Gradient-boosted decision trees with second-order (Newton) leaf values.
//!
//! Binary problems use one logistic tree per round; problems with `K > 2`
//! classes use `K` softmax trees per round. Splits are exact: every midpoint
//! between consecutive distinct values of a feature is a candidate, scored by
//!
//! ```text
//! gain = GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda) - gamma
//! ```
//!
//! Candidates with non-positive gain or with a child hessian sum below
//! `min_child_weight` are skipped. Ties go to the lowest feature index, then
//! the lowest threshold. Stored leaf values already include the learning rate.

mod tree;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

use tree::GrowParams;
pub use tree::TreeNode;

pub const MODEL_VERSION: u64 = 1;
pub const PRESET_NAMES: [&str; 3] = ["default", "deep", "light"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub preset_name: String,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            preset_name: "default".into(),
        }
    }
}

impl GbdtConfig {
    /// Named presets: `default`, `deep` (depth 10, 200 rounds) and `light`
    /// (depth 3, 50 rounds).
    pub fn preset(name: &str) -> Result<Self> {
        let base = GbdtConfig {
            preset_name: name.to_owned(),
            ..GbdtConfig::default()
        };
        match name {
            "default" => Ok(base),
            "deep" => Ok(GbdtConfig {
                max_depth: 10,
                rounds: 200,
                ..base
            }),
            "light" => Ok(GbdtConfig {
                max_depth: 3,
                rounds: 50,
                ..base
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset {other:?} (expected one of {PRESET_NAMES:?})"
            ))),
        }
    }

    /// Parses a comma-separated preset list such as `default,deep,light`.
    pub fn presets(list: &str) -> Result<Vec<Self>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Self::preset)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("gbdt config: {msg}")));
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        if !(self.lambda.is_finite() && self.gamma.is_finite() && self.min_child_weight.is_finite())
        {
            return bad("regularization terms must be finite");
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u64,
    pub config: GbdtConfig,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub base_score: Vec<f64>,
    /// `trees[round][k]`; one tree per round for binary models.
    pub trees: Vec<Vec<TreeNode>>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn trees_per_round(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

/// Fits a model. `feature_names` labels the columns of `x`.
pub fn train(
    x: &Matrix,
    y: &[usize],
    config: &GbdtConfig,
    n_classes: usize,
    feature_names: Vec<String>,
) -> Result<GbdtModel> {
    config.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty design matrix".into()));
    }
    if n != y.len() {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::Shape(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("design matrix".into()));
    }

    let per_round = trees_per_round(n_classes);
    let params = config.grow_params();
    let sorted = tree::sort_columns(x);
    let base_score = vec![0.0; per_round];
    // raw scores, row-major n x per_round
    let mut logits: Vec<f64> = (0..n).flat_map(|_| base_score.iter().copied()).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut probs = vec![0.0; n * per_round];
    let mut trees = Vec::with_capacity(config.rounds);

    for _ in 0..config.rounds {
        if per_round == 1 {
            for i in 0..n {
                probs[i] = sigmoid(logits[i]);
            }
        } else {
            for i in 0..n {
                let span = i * per_round..(i + 1) * per_round;
                softmax_into(&logits[span.clone()], &mut probs[span]);
            }
        }
        let mut round = Vec::with_capacity(per_round);
        for k in 0..per_round {
            for i in 0..n {
                let p = probs[i * per_round + k];
                let target = if per_round == 1 {
                    (y[i] == 1) as u8 as f64
                } else {
                    (y[i] == k) as u8 as f64
                };
                grad[i] = p - target;
                hess[i] = p * (1.0 - p);
            }
            round.push(tree::grow(x, &sorted, &grad, &hess, &params));
        }
        for (i, row) in x.rows().enumerate() {
            for (k, t) in round.iter().enumerate() {
                logits[i * per_round + k] += t.predict(row);
            }
        }
        trees.push(round);
    }

    Ok(GbdtModel {
        version: MODEL_VERSION,
        config: config.clone(),
        n_classes,
        feature_names,
        base_score,
        trees,
    })
}

impl GbdtModel {
    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.n_cols() != self.feature_names.len() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.n_cols()
            )));
        }
        Ok(())
    }

    fn raw_scores(&self, row: &[f64], rounds: usize) -> Vec<f64> {
        let mut z = self.base_score.clone();
        for round in &self.trees[..rounds] {
            for (k, t) in round.iter().enumerate() {
                z[k] += t.predict(row);
            }
        }
        z
    }

    fn to_proba(&self, z: &[f64]) -> Vec<f64> {
        if self.n_classes == 2 {
            let p = sigmoid(z[0]);
            vec![1.0 - p, p]
        } else {
            let mut out = vec![0.0; z.len()];
            softmax_into(z, &mut out);
            out
        }
    }

    /// Class probability rows, one per row of `x`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check_width(x)?;
        let rounds = self.trees.len();
        Ok(crate::par::map_range(x.n_rows(), |i| {
            self.to_proba(&self.raw_scores(x.row(i), rounds))
        }))
    }

    pub fn predict_class(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    /// Mean log-loss on `(x, y)` after each boosting round (index 0 is the
    /// base score, before any tree).
    pub fn staged_log_loss(&self, x: &Matrix, y: &[usize]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        if y.len() != x.n_rows() || y.is_empty() {
            return Err(Error::Shape("labels do not match rows".into()));
        }
        let per_row: Vec<Vec<f64>> = crate::par::map_range(x.n_rows(), |i| {
            let row = x.row(i);
            let mut z = self.base_score.clone();
            let mut losses = Vec::with_capacity(self.trees.len() + 1);
            losses.push(-self.to_proba(&z)[y[i]].max(1e-15).ln());
            for round in &self.trees {
                for (k, t) in round.iter().enumerate() {
                    z[k] += t.predict(row);
                }
                losses.push(-self.to_proba(&z)[y[i]].max(1e-15).ln());
            }
            losses
        });
        let n = per_row.len() as f64;
        Ok((0..=self.trees.len())
            .map(|r| per_row.iter().map(|l| l[r]).sum::<f64>() / n)
            .collect())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: Option<u64>,
        }
        let probe: Probe =
            serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e))?;
        match probe.version {
            Some(MODEL_VERSION) => {}
            Some(v) => return Err(Error::Version(v)),
            None => return Err(Error::parse(path, 1, "missing version tag")),
        }
        let model: GbdtModel =
            serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e))?;
        model.check_shape(path)?;
        Ok(model)
    }

    fn check_shape(&self, path: &Path) -> Result<()> {
        let per_round = trees_per_round(self.n_classes);
        let ok = self.n_classes >= 2
            && self.base_score.len() == per_round
            && self.trees.len() == self.config.rounds
            && self.trees.iter().all(|r| r.len() == per_round)
            && self
                .trees
                .iter()
                .flatten()
                .all(|t| valid_tree(t, self.feature_names.len()));
        if ok {
            Ok(())
        } else {
            Err(Error::parse(path, 1, "model shape is inconsistent"))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

fn valid_tree(t: &TreeNode, n_features: usize) -> bool {
    match t {
        TreeNode::Leaf { value } => value.is_finite(),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            *feature < n_features
                && threshold.is_finite()
                && valid_tree(left, n_features)
                && valid_tree(right, n_features)
        }
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
