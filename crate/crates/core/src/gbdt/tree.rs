//! Exact greedy growth of one regression tree on gradient/hessian pairs.
//!
//! Columns are sorted once per training run. Each level scans every column
//! in sorted order, routing rows to the accumulator of the node they sit in,
//! so a level costs one pass per feature regardless of how many nodes it has.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Splits whose gain does not exceed this fraction of the scores involved are
/// treated as zero gain. Keeps pure nodes from splitting on rounding noise.
pub(crate) const GAIN_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

/// `G^2 / (H + lambda)`, or 0 when the denominator vanishes.
pub(crate) fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

/// Newton step `-G / (H + lambda)`, or 0 when the denominator vanishes.
pub(crate) fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

/// Gain of splitting `(g, h)` into `(gl, hl)` and the remainder, or `None`
/// if the split is not admissible.
pub(crate) fn split_gain(g: f64, h: f64, gl: f64, hl: f64, p: &GrowParams) -> Option<f64> {
    let (gr, hr) = (g - gl, h - hl);
    if hl < p.min_child_weight || hr < p.min_child_weight {
        return None;
    }
    let (sl, sr, sp) = (
        score(gl, hl, p.lambda),
        score(gr, hr, p.lambda),
        score(g, h, p.lambda),
    );
    let gain = sl + sr - sp - p.gamma;
    (gain > GAIN_REL_TOL * (sl + sr + sp)).then_some(gain)
}

/// Threshold strictly between `lo < hi` such that `lo < t <= hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Row indices of each column, ascending by value then row index.
pub(crate) fn sort_columns(x: &Matrix) -> Vec<Vec<u32>> {
    crate::par::map_range(x.n_cols(), |j| {
        let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
        idx.sort_by(|&a, &b| {
            x.get(a as usize, j)
                .total_cmp(&x.get(b as usize, j))
                .then(a.cmp(&b))
        });
        idx
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
}

enum Slot {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

struct Node {
    g: f64,
    h: f64,
    slot: Slot,
}

const INACTIVE: u32 = u32::MAX;

pub(crate) fn grow(
    x: &Matrix,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> TreeNode {
    let n = x.n_rows();
    let (g0, h0) = sums(0..n, grad, hess);
    let mut nodes = vec![Node {
        g: g0,
        h: h0,
        slot: Slot::Leaf,
    }];
    // node id of each row while that node may still split
    let mut row_node = vec![0u32; n];
    let mut active: Vec<usize> = vec![0];

    for _depth in 0..p.max_depth {
        if active.is_empty() {
            break;
        }
        // position of a node within `active`
        let mut slot_of = vec![INACTIVE; nodes.len()];
        for (s, &id) in active.iter().enumerate() {
            slot_of[id] = s as u32;
        }
        let totals: Vec<(f64, f64)> = active
            .iter()
            .map(|&id| (nodes[id].g, nodes[id].h))
            .collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = crate::par::map_range(x.n_cols(), |f| {
            scan_feature(
                x, f, &sorted[f], grad, hess, &row_node, &slot_of, &totals, p,
            )
        });

        let mut best: Vec<Option<(usize, Candidate)>> = vec![None; active.len()];
        for (f, cands) in per_feature.iter().enumerate() {
            for (s, c) in cands.iter().enumerate() {
                if let Some(c) = c {
                    if best[s].is_none_or(|(_, b)| c.gain > b.gain) {
                        best[s] = Some((f, *c));
                    }
                }
            }
        }

        let mut children: Vec<usize> = Vec::new();
        let mut split_of = vec![None; active.len()];
        for (s, b) in best.iter().enumerate() {
            if let Some((feature, c)) = *b {
                let left = nodes.len();
                let right = left + 1;
                for _ in 0..2 {
                    nodes.push(Node {
                        g: 0.0,
                        h: 0.0,
                        slot: Slot::Leaf,
                    });
                }
                nodes[active[s]].slot = Slot::Split {
                    feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                split_of[s] = Some((feature, c.threshold, left, right));
                children.extend([left, right]);
            }
        }
        // route rows and accumulate child sums in row order
        for r in 0..n {
            let id = row_node[r];
            if id == INACTIVE {
                continue;
            }
            let s = slot_of[id as usize] as usize;
            match split_of[s] {
                Some((f, t, l, rt)) => {
                    let child = if x.get(r, f) < t { l } else { rt };
                    nodes[child].g += grad[r];
                    nodes[child].h += hess[r];
                    row_node[r] = child as u32;
                }
                None => row_node[r] = INACTIVE,
            }
        }
        active = children;
    }

    build(&nodes, 0, p)
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    x: &Matrix,
    f: usize,
    order: &[u32],
    grad: &[f64],
    hess: &[f64],
    row_node: &[u32],
    slot_of: &[u32],
    totals: &[(f64, f64)],
    p: &GrowParams,
) -> Vec<Option<Candidate>> {
    let k = totals.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last: Vec<Option<f64>> = vec![None; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    for &r in order {
        let r = r as usize;
        let id = row_node[r];
        if id == INACTIVE {
            continue;
        }
        let s = slot_of[id as usize] as usize;
        let v = x.get(r, f);
        if let Some(prev) = last[s] {
            if prev < v {
                let (g, h) = totals[s];
                if let Some(gain) = split_gain(g, h, gl[s], hl[s], p) {
                    if best[s].is_none_or(|b| gain > b.gain) {
                        best[s] = Some(Candidate {
                            gain,
                            threshold: midpoint(prev, v),
                        });
                    }
                }
            }
        }
        gl[s] += grad[r];
        hl[s] += hess[r];
        last[s] = Some(v);
    }
    best
}

fn sums(rows: std::ops::Range<usize>, grad: &[f64], hess: &[f64]) -> (f64, f64) {
    rows.fold((0.0, 0.0), |(g, h), r| (g + grad[r], h + hess[r]))
}

fn build(nodes: &[Node], id: usize, p: &GrowParams) -> TreeNode {
    let node = &nodes[id];
    match node.slot {
        Slot::Leaf => TreeNode::Leaf {
            value: p.learning_rate * leaf_weight(node.g, node.h, p.lambda),
        },
        Slot::Split {
            feature,
            threshold,
            left,
            right,
        } => TreeNode::Split {
            feature,
            threshold,
            left: Box::new(build(nodes, left, p)),
            right: Box::new(build(nodes, right, p)),
        },
    }
}
