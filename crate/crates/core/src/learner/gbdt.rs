//! Second-order gradient boosting of regression trees for binary logistic
//! loss, with exact greedy split search over presorted feature columns.
//!
//! Trees grow level by level: at each depth every feature column is scanned
//! once in presorted order, and each open node keeps running left-side
//! gradient sums, so one pass evaluates every candidate threshold of every
//! node. Thresholds are midpoints between consecutive distinct values in the
//! node and samples with `x < threshold` go left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyperparams {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    #[serde(default = "one")]
    pub l2_leaf_reg: f64,
    #[serde(default = "one")]
    pub min_child_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        GbdtHyperparams {
            max_depth: 6,
            n_estimators: 200,
            learning_rate: 0.1,
            l2_leaf_reg: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbdtHyperparams {
    pub fn new(max_depth: usize, n_estimators: usize, learning_rate: f64) -> Self {
        GbdtHyperparams {
            max_depth,
            n_estimators,
            learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 || self.n_estimators < 1 {
            return Err(Error::Validation(format!(
                "max_depth and n_estimators must be >= 1 (got {}, {})",
                self.max_depth, self.n_estimators
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation(format!(
                "learning_rate must be positive (got {})",
                self.learning_rate
            )));
        }
        if !(self.l2_leaf_reg >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::Validation("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cartesian product in depth → estimators → learning-rate order.
pub fn expand_grid(depths: &[usize], estimators: &[usize], rates: &[f64]) -> Vec<GbdtHyperparams> {
    let mut grid = Vec::with_capacity(depths.len() * estimators.len() * rates.len());
    for &d in depths {
        for &e in estimators {
            for &r in rates {
                grid.push(GbdtHyperparams::new(d, e, r));
            }
        }
    }
    grid
}

/// Depth 5–8, 200 or 300 trees, learning rate 0.05/0.1/0.3.
pub fn default_grid() -> Vec<GbdtHyperparams> {
    expand_grid(&[5, 6, 7, 8], &[200, 300], &[0.05, 0.1, 0.3])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub base_score: f64,
    pub hyperparams: GbdtHyperparams,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl TrainedEnsemble {
    pub fn predict_margin_row(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    /// Probabilities of the positive class, one per row.
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Dimension {
                sample_id: "<matrix>".into(),
                source_id: "<model>".into(),
                expected: self.n_features,
                actual: x.cols(),
            });
        }
        Ok((0..x.rows())
            .map(|i| sigmoid(self.predict_margin_row(x.row(i))))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("<model json>", e))
    }
}

pub fn predict_scores(model: &TrainedEnsemble, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_scores(x)
}

pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary log-loss of margins against labels.
pub fn log_loss(margins: &[f64], y: &[u8]) -> f64 {
    let s: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| if t == 1 { softplus(-m) } else { softplus(m) })
        .sum();
    s / margins.len() as f64
}

pub(crate) fn check_training_data(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Validation(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("training matrix".into()));
    }
    if let Some(bad) = y.iter().find(|&&t| t > 1) {
        return Err(Error::Validation(format!("label {bad} is not 0/1")));
    }
    let pos = y.iter().filter(|&&t| t == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateData(format!(
            "{pos} positives among {} samples",
            y.len()
        )));
    }
    Ok(())
}

pub fn train_gbdt(
    x: &Matrix,
    y: &[u8],
    hp: &GbdtHyperparams,
    seed: u64,
) -> Result<TrainedEnsemble> {
    train_gbdt_traced(x, y, hp, seed).map(|(m, _)| m)
}

/// Trains and also returns the mean training log-loss before the first tree
/// and after each tree.
pub fn train_gbdt_traced(
    x: &Matrix,
    y: &[u8],
    hp: &GbdtHyperparams,
    seed: u64,
) -> Result<(TrainedEnsemble, Vec<f64>)> {
    hp.validate()?;
    check_training_data(x, y)?;
    let n = x.rows();
    let d = x.cols();

    let columns: Vec<Vec<f64>> = (0..d).map(|f| (0..n).map(|i| x.get(i, f)).collect()).collect();
    let order: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let sorted_values: Vec<Vec<f64>> = order
        .iter()
        .zip(&columns)
        .map(|(idx, col)| idx.iter().map(|&i| col[i as usize]).collect())
        .collect();

    let pos = y.iter().filter(|&&t| t == 1).count() as f64;
    let p = pos / n as f64;
    let base_score = (p / (1.0 - p)).ln();

    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut loss = log_loss(&margins, y);
    let mut trace = vec![loss];
    let mut trees = Vec::with_capacity(hp.n_estimators);
    let mut builder = TreeBuilder::new(n);

    for _ in 0..hp.n_estimators {
        for i in 0..n {
            let pi = sigmoid(margins[i]);
            grad[i] = pi - y[i] as f64;
            hess[i] = pi * (1.0 - pi);
        }
        let (mut tree, leaf_of) = builder.build(&columns, &order, &sorted_values, &grad, &hess, hp);

        let mut step = 1.0;
        let mut candidate = vec![0.0; n];
        let mut new_loss;
        let mut shrinks = 0;
        loop {
            for i in 0..n {
                candidate[i] = margins[i] + step * leaf_value(&tree, leaf_of[i]);
            }
            new_loss = log_loss(&candidate, y);
            if new_loss <= loss || shrinks == 60 {
                break;
            }
            // a full Newton step overshot; back off
            step *= 0.5;
            shrinks += 1;
        }
        if new_loss > loss {
            step = 0.0;
            candidate.copy_from_slice(&margins);
            new_loss = loss;
        }
        if step != 1.0 {
            for node in &mut tree.nodes {
                if let Node::Leaf { leaf } = node {
                    *leaf *= step;
                }
            }
        }
        margins = candidate;
        loss = new_loss;
        trace.push(loss);
        trees.push(tree);
    }

    Ok((
        TrainedEnsemble {
            base_score,
            hyperparams: *hp,
            seed,
            n_features: d,
            trees,
        },
        trace,
    ))
}

fn leaf_value(tree: &Tree, node: usize) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { leaf } => leaf,
        Node::Split { .. } => unreachable!("samples end in leaves"),
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Scan {
    g_left: f64,
    h_left: f64,
    last: f64,
    seen: bool,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder {
    node_of: Vec<u32>,
    leaf_of: Vec<usize>,
}

impl TreeBuilder {
    fn new(n: usize) -> Self {
        TreeBuilder {
            node_of: vec![0; n],
            leaf_of: vec![0; n],
        }
    }

    /// Returns the tree and the leaf node index of every training row.
    fn build(
        &mut self,
        columns: &[Vec<f64>],
        order: &[Vec<u32>],
        sorted_values: &[Vec<f64>],
        grad: &[f64],
        hess: &[f64],
        hp: &GbdtHyperparams,
    ) -> (Tree, Vec<usize>) {
        let n = grad.len();
        let lambda = hp.l2_leaf_reg;
        let mcw = hp.min_child_weight;
        self.node_of.iter_mut().for_each(|v| *v = 0);

        let (g0, h0) = grad
            .iter()
            .zip(hess)
            .fold((0.0, 0.0), |(g, h), (a, b)| (g + a, h + b));
        // open nodes at the current depth: (node index, G, H)
        let mut nodes: Vec<Option<Node>> = vec![None];
        let mut open: Vec<(usize, f64, f64)> = vec![(0, g0, h0)];
        let mut slot_of: Vec<u32> = vec![0];

        for _depth in 0..hp.max_depth {
            if open.is_empty() {
                break;
            }
            let k = open.len();
            let mut best = vec![
                Best {
                    gain: 0.0,
                    feature: usize::MAX,
                    threshold: 0.0,
                };
                k
            ];
            let fresh = Scan {
                g_left: 0.0,
                h_left: 0.0,
                last: 0.0,
                seen: false,
            };
            let mut scans = vec![fresh; k];
            let parent: Vec<f64> = open.iter().map(|&(_, g, h)| g * g / (h + lambda)).collect();
            for f in 0..columns.len() {
                scans.iter_mut().for_each(|s| *s = fresh);
                for (&row, &v) in order[f].iter().zip(&sorted_values[f]) {
                    let row = row as usize;
                    let node = self.node_of[row];
                    if node == NONE {
                        continue;
                    }
                    let slot = slot_of[node as usize];
                    if slot == NONE {
                        continue;
                    }
                    let slot = slot as usize;
                    let sc = &mut scans[slot];
                    if sc.seen && v > sc.last {
                        let (_, g, h) = open[slot];
                        let (gl, hl) = (sc.g_left, sc.h_left);
                        let (gr, hr) = (g - gl, h - hl);
                        if hl >= mcw && hr >= mcw {
                            let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                                - parent[slot];
                            if gain > best[slot].gain {
                                best[slot] = Best {
                                    gain,
                                    feature: f,
                                    threshold: midpoint(sc.last, v),
                                };
                            }
                        }
                    }
                    sc.g_left += grad[row];
                    sc.h_left += hess[row];
                    sc.last = v;
                    sc.seen = true;
                }
            }

            // materialize splits and leaves for this level
            let mut next_open = Vec::new();
            let mut child_of: Vec<Option<(usize, usize)>> = vec![None; k];
            for (slot, &(node, g, h)) in open.iter().enumerate() {
                let b = best[slot];
                if b.feature == usize::MAX {
                    nodes[node] = Some(Node::Leaf {
                        leaf: leaf_weight(g, h, lambda, hp.learning_rate),
                    });
                    continue;
                }
                let left = nodes.len();
                let right = left + 1;
                nodes.push(None);
                nodes.push(None);
                nodes[node] = Some(Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                });
                child_of[slot] = Some((left, right));
            }
            // route rows and accumulate child sums in row order
            let mut sums = vec![(0.0, 0.0, false); nodes.len()];
            for row in 0..n {
                let node = self.node_of[row];
                if node == NONE {
                    continue;
                }
                let slot = slot_of[node as usize];
                if slot == NONE {
                    continue;
                }
                match child_of[slot as usize] {
                    None => {
                        self.leaf_of[row] = node as usize;
                        self.node_of[row] = NONE;
                    }
                    Some((l, r)) => {
                        let b = best[slot as usize];
                        let child = if columns[b.feature][row] < b.threshold { l } else { r };
                        self.node_of[row] = child as u32;
                        let e = &mut sums[child];
                        e.0 += grad[row];
                        e.1 += hess[row];
                        e.2 = true;
                    }
                }
            }
            slot_of = vec![NONE; nodes.len()];
            for (child, &(g, h, used)) in sums.iter().enumerate() {
                if used {
                    slot_of[child] = next_open.len() as u32;
                    next_open.push((child, g, h));
                }
            }
            open = next_open;
        }
        for &(node, g, h) in &open {
            nodes[node] = Some(Node::Leaf {
                leaf: leaf_weight(g, h, lambda, hp.learning_rate),
            });
        }

        for row in 0..n {
            if self.node_of[row] != NONE {
                self.leaf_of[row] = self.node_of[row] as usize;
            }
        }
        let tree = Tree {
            nodes: nodes.into_iter().map(|n| n.expect("every node resolved")).collect(),
        };
        let leaf_of = self.leaf_of.clone();
        (tree, leaf_of)
    }
}

fn leaf_weight(g: f64, h: f64, lambda: f64, lr: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        -g / denom * lr
    }
}

/// Midpoint of two consecutive distinct values, nudged so that `lo < t <= hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t > lo && t <= hi {
        t
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auroc;

    fn xor(n_per: usize) -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let centers = [(-1.0, -1.0, 0u8), (1.0, 1.0, 0), (-1.0, 1.0, 1), (1.0, -1.0, 1)];
        for (ci, &(cx, cy, label)) in centers.iter().enumerate() {
            for k in 0..n_per {
                let jx = ((k * 7 + ci * 3) % 11) as f64 / 30.0 - 0.15;
                let jy = ((k * 5 + ci) % 13) as f64 / 30.0 - 0.2;
                rows.push(vec![cx + jx, cy + jy]);
                y.push(label);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn default_grid_has_24_points() {
        let g = default_grid();
        assert_eq!(g.len(), 24);
        assert_eq!(g[0], GbdtHyperparams::new(5, 200, 0.05));
        assert_eq!(g[23], GbdtHyperparams::new(8, 300, 0.3));
    }

    #[test]
    fn xor_is_learned_with_depth_two() {
        let (x, y) = xor(50);
        let m = train_gbdt(&x, &y, &GbdtHyperparams::new(2, 20, 0.3), 0).unwrap();
        let s = m.predict_scores(&x).unwrap();
        assert_eq!(auroc(&s, &y).unwrap(), 1.0);
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn separable_line_needs_one_tree() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| (i >= 10) as u8).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = train_gbdt(&x, &y, &GbdtHyperparams::new(1, 1, 0.3), 0).unwrap();
        match m.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 9.5),
            _ => panic!("expected a split"),
        }
        assert_eq!(auroc(&m.predict_scores(&x).unwrap(), &y).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            train_gbdt(&x, &[1, 1], &GbdtHyperparams::default(), 0),
            Err(Error::DegenerateData(_))
        ));
        let bad = Matrix::from_rows(&[vec![f64::NAN], vec![2.0]]).unwrap();
        assert!(matches!(
            train_gbdt(&bad, &[0, 1], &GbdtHyperparams::default(), 0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_trees_predict_base_score() {
        let m = TrainedEnsemble {
            base_score: 0.4,
            hyperparams: GbdtHyperparams::default(),
            seed: 0,
            n_features: 1,
            trees: vec![],
        };
        let x = Matrix::from_rows(&[vec![1.0], vec![-3.0]]).unwrap();
        assert_eq!(m.predict_scores(&x).unwrap(), vec![sigmoid(0.4); 2]);
    }

    #[test]
    fn hand_stump() {
        let stump = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { leaf: -1.0 },
                Node::Leaf { leaf: 1.0 },
            ],
        };
        let m = TrainedEnsemble {
            base_score: 0.0,
            hyperparams: GbdtHyperparams::new(1, 1, 1.0),
            seed: 0,
            n_features: 1,
            trees: vec![stump],
        };
        let x = Matrix::from_rows(&[vec![-2.0], vec![3.0]]).unwrap();
        let s = m.predict_scores(&x).unwrap();
        let e = [1.0 / (1.0 + 1f64.exp()), 1.0 / (1.0 + (-1f64).exp())];
        assert!((s[0] - e[0]).abs() < 1e-15 && (s[1] - e[1]).abs() < 1e-15);
        assert!(m.predict_scores(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let (x, y) = xor(20);
        let m = train_gbdt(&x, &y, &GbdtHyperparams::new(3, 10, 0.1), 7).unwrap();
        let back = TrainedEnsemble::from_json(&m.to_json()).unwrap();
        let a = m.predict_scores(&x).unwrap();
        let b = back.predict_scores(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert!(v["trees"][0]["nodes"][0].get("feature").is_some());
    }

    #[test]
    fn midpoint_between_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t && t <= hi);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
