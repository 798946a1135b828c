//! Squared-loss gradient boosting over exact-greedy regression trees.
//!
//! Columns are pre-sorted once and stored sparsely: only non-zero entries
//! are listed, and the zero block of each node is reconstructed from node
//! totals. The candidate thresholds and split choice are the same as a
//! dense scan over midpoints of sorted unique values. Ties go to the lowest
//! feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::Regressor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub rounds: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 3, rounds: 200, min_leaf: 20, learning_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { leaf_value: f64 },
}

impl TreeNode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_value } => return *leaf_value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] < *threshold { left } else { right };
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

    fn visit<F: FnMut(&TreeNode)>(&self, f: &mut F) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTreesModel {
    pub initial_prediction: f64,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub params: TreeParams,
    pub n_features: usize,
}

impl Regressor for BoostedTreesModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_rounds(x, self.trees.len())
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

impl BoostedTreesModel {
    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: &[f64], rounds: usize) -> f64 {
        let mut out = self.initial_prediction;
        for tree in self.trees.iter().take(rounds) {
            out += self.learning_rate * tree.eval(x);
        }
        out
    }

    /// The model truncated to its first `rounds` trees.
    pub fn truncated(&self, rounds: usize) -> Self {
        let mut m = self.clone();
        m.trees.truncate(rounds);
        m.params.rounds = rounds;
        m
    }

    pub fn validate(&self) -> Result<()> {
        let mut ok = self.initial_prediction.is_finite() && self.learning_rate.is_finite();
        for tree in &self.trees {
            tree.visit(&mut |n| match n {
                TreeNode::Leaf { leaf_value } => ok &= leaf_value.is_finite(),
                TreeNode::Split { feature, threshold, .. } => ok &= *feature < self.n_features && !threshold.is_nan(),
            });
        }
        if ok { Ok(()) } else { Err(Error::InvalidBundle("tree with invalid split or leaf".into())) }
    }
}

/// Per-feature non-zero entries sorted by (value, row).
struct SortedColumns {
    columns: Vec<Vec<(f64, u32)>>,
}

impl SortedColumns {
    fn new(x: &[&[f64]], p: usize) -> Self {
        let mut columns: Vec<Vec<(f64, u32)>> = vec![Vec::new(); p];
        for (i, row) in x.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    columns[j].push((v, i as u32));
                }
            }
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        SortedColumns { columns }
    }
}

#[derive(Clone, Copy)]
struct NodeStats {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy)]
struct ScanState {
    count: usize,
    sum: f64,
    prev: Option<f64>,
    zero_done: bool,
}

enum Arena {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

struct TreeBuilder<'a> {
    x: &'a [&'a [f64]],
    cols: &'a SortedColumns,
    params: TreeParams,
    gain_tol: f64,
}

impl TreeBuilder<'_> {
    fn evaluate(
        &self,
        stats: &NodeStats,
        st: &ScanState,
        threshold: f64,
        feature: usize,
        best: &mut Option<Candidate>,
    ) {
        let nl = st.count;
        let nr = stats.count - nl;
        if nl < self.params.min_leaf || nr < self.params.min_leaf {
            return;
        }
        let sl = st.sum;
        let sr = stats.sum - sl;
        let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - stats.sum * stats.sum / stats.count as f64;
        if gain <= self.gain_tol * stats.sum_sq {
            return;
        }
        if best.is_none_or(|b| gain > b.gain) {
            *best = Some(Candidate { gain, feature, threshold });
        }
    }

    /// Best split for every node in `active` (indexed by node id via `node_of`).
    fn best_splits(
        &self,
        residual: &[f64],
        node_of: &[u32],
        stats: &[NodeStats],
        splittable: &[bool],
    ) -> Vec<Option<Candidate>> {
        let n_nodes = stats.len();
        let mut best: Vec<Option<Candidate>> = vec![None; n_nodes];
        let mut nz_count = vec![0usize; n_nodes];
        let mut nz_sum = vec![0.0f64; n_nodes];
        let mut scan = vec![ScanState { count: 0, sum: 0.0, prev: None, zero_done: false }; n_nodes];
        for (feature, col) in self.cols.columns.iter().enumerate() {
            nz_count.iter_mut().for_each(|c| *c = 0);
            nz_sum.iter_mut().for_each(|s| *s = 0.0);
            for &(_, row) in col {
                let nd = node_of[row as usize] as usize;
                if splittable[nd] {
                    nz_count[nd] += 1;
                    nz_sum[nd] += residual[row as usize];
                }
            }
            for st in scan.iter_mut() {
                *st = ScanState { count: 0, sum: 0.0, prev: None, zero_done: false };
            }
            let zero_block = |nd: usize, st: &mut ScanState, best: &mut Option<Candidate>| {
                st.zero_done = true;
                let zeros = stats[nd].count - nz_count[nd];
                if zeros == 0 {
                    return;
                }
                if let Some(pv) = st.prev {
                    self.evaluate(&stats[nd], st, midpoint(pv, 0.0), feature, best);
                }
                st.count += zeros;
                st.sum += stats[nd].sum - nz_sum[nd];
                st.prev = Some(0.0);
            };
            for &(v, row) in col {
                let nd = node_of[row as usize] as usize;
                if !splittable[nd] {
                    continue;
                }
                let st = &mut scan[nd];
                if v > 0.0 && !st.zero_done {
                    zero_block(nd, st, &mut best[nd]);
                }
                if let Some(pv) = st.prev
                    && pv < v
                {
                    self.evaluate(&stats[nd], st, midpoint(pv, v), feature, &mut best[nd]);
                }
                st.count += 1;
                st.sum += residual[row as usize];
                st.prev = Some(v);
            }
            for nd in 0..n_nodes {
                if splittable[nd] && !scan[nd].zero_done {
                    let st = &mut scan[nd];
                    zero_block(nd, st, &mut best[nd]);
                }
            }
        }
        best
    }

    fn build(&self, residual: &[f64]) -> Option<TreeNode> {
        let n = residual.len();
        let mut arena: Vec<Arena> = vec![Arena::Leaf(0.0)];
        let mut node_of = vec![0u32; n];
        // Nodes of the current level, by arena id.
        let mut level: Vec<usize> = vec![0];
        let mut any_split = false;
        for depth in 0..=self.params.max_depth {
            let mut stats = vec![NodeStats { count: 0, sum: 0.0, sum_sq: 0.0 }; arena.len()];
            for (i, &nd) in node_of.iter().enumerate() {
                let s = &mut stats[nd as usize];
                s.count += 1;
                s.sum += residual[i];
                s.sum_sq += residual[i] * residual[i];
            }
            let mut splittable = vec![false; arena.len()];
            if depth < self.params.max_depth {
                for &nd in &level {
                    splittable[nd] = stats[nd].count >= 2 * self.params.min_leaf;
                }
            }
            let best = if splittable.iter().any(|s| *s) {
                self.best_splits(residual, &node_of, &stats, &splittable)
            } else {
                vec![None; arena.len()]
            };
            let mut next_level = Vec::new();
            for &nd in &level {
                match best[nd] {
                    Some(c) => {
                        let left = arena.len();
                        arena.push(Arena::Leaf(0.0));
                        let right = arena.len();
                        arena.push(Arena::Leaf(0.0));
                        arena[nd] = Arena::Split { feature: c.feature, threshold: c.threshold, left, right };
                        next_level.push(left);
                        next_level.push(right);
                        any_split = true;
                    }
                    None => {
                        let s = stats[nd];
                        let mean = if s.count > 0 { s.sum / s.count as f64 } else { 0.0 };
                        arena[nd] = Arena::Leaf(mean);
                    }
                }
            }
            if next_level.is_empty() {
                break;
            }
            for (i, nd) in node_of.iter_mut().enumerate() {
                if let Arena::Split { feature, threshold, left, right } = arena[*nd as usize] {
                    *nd = if self.x[i][feature] < threshold { left } else { right } as u32;
                }
            }
            level = next_level;
        }
        any_split.then(|| to_tree(&arena, 0))
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo { m } else { hi }
}

fn to_tree(arena: &[Arena], id: usize) -> TreeNode {
    match arena[id] {
        Arena::Leaf(v) => TreeNode::Leaf { leaf_value: v },
        Arena::Split { feature, threshold, left, right } => TreeNode::Split {
            feature,
            threshold,
            left: Box::new(to_tree(arena, left)),
            right: Box::new(to_tree(arena, right)),
        },
    }
}

/// Training RMSE after each boosting round (index 0 = initial prediction).
pub type RmseTrace = Vec<f64>;

pub fn train_boosted_trees(x: &[&[f64]], y: &[f64], params: TreeParams) -> Result<BoostedTreesModel> {
    train_boosted_trees_traced(x, y, params).map(|(m, _)| m)
}

pub fn train_boosted_trees_traced(
    x: &[&[f64]],
    y: &[f64],
    params: TreeParams,
) -> Result<(BoostedTreesModel, RmseTrace)> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidArgument("row/target count mismatch".into()));
    }
    if params.min_leaf == 0 || n < 2 * params.min_leaf {
        return Err(Error::InsufficientData(format!(
            "boosted trees need at least 2·min_leaf = {} rows, got {n}",
            2 * params.min_leaf.max(1)
        )));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("learning_rate must be in (0, 1], got {}", params.learning_rate)));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged feature matrix".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite training value".into()));
    }
    let initial = y.iter().sum::<f64>() / n as f64;
    let mut model = BoostedTreesModel {
        initial_prediction: initial,
        trees: Vec::new(),
        learning_rate: params.learning_rate,
        params,
        n_features: p,
    };
    let mut pred = vec![initial; n];
    let rmse = |pred: &[f64]| (y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt();
    let mut trace = vec![rmse(&pred)];
    if y.iter().all(|v| *v == y[0]) {
        return Ok((model, trace));
    }
    let cols = SortedColumns::new(x, p);
    let builder = TreeBuilder { x, cols: &cols, params, gain_tol: 1e-12 };
    let mut residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    for _ in 0..params.rounds {
        let Some(tree) = builder.build(&residual) else {
            break;
        };
        for (i, row) in x.iter().enumerate() {
            pred[i] += params.learning_rate * tree.eval(row);
            residual[i] = y[i] - pred[i];
        }
        model.trees.push(tree);
        trace.push(rmse(&pred));
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn hand_traced_stump() {
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let y = [0.0, 0.0, 10.0, 10.0];
        let params = TreeParams { max_depth: 1, rounds: 1, min_leaf: 1, learning_rate: 1.0 };
        let m = train_boosted_trees(&rows(&x), &y, params).unwrap();
        assert_eq!(m.initial_prediction, 5.0);
        assert_eq!(m.trees.len(), 1);
        match &m.trees[0] {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(**left, TreeNode::Leaf { leaf_value: -5.0 });
                assert_eq!(**right, TreeNode::Leaf { leaf_value: 5.0 });
            }
            other => panic!("{other:?}"),
        }
        let preds: Vec<f64> = x.iter().map(|r| m.predict(r)).collect();
        assert_eq!(preds, y);
    }

    #[test]
    fn constant_targets_give_no_trees() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let y = vec![7.0; 50];
        let m = train_boosted_trees(&rows(&x), &y, TreeParams::default()).unwrap();
        assert!(m.trees.is_empty());
        assert!(x.iter().all(|r| m.predict(r) == 7.0));
    }

    #[test]
    fn too_few_rows() {
        let x: Vec<Vec<f64>> = (0..39).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..39).map(f64::from).collect();
        assert!(train_boosted_trees(&rows(&x), &y, TreeParams::default()).is_err());
    }

    #[test]
    fn tie_breaks_to_lowest_feature() {
        // Two identical columns: the split must use feature 0.
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![(i / 4) as f64, (i / 4) as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 3.0 }).collect();
        let params = TreeParams { max_depth: 1, rounds: 1, min_leaf: 1, learning_rate: 1.0 };
        let m = train_boosted_trees(&rows(&x), &y, params).unwrap();
        let TreeNode::Split { feature, .. } = &m.trees[0] else { panic!() };
        assert_eq!(*feature, 0);
    }

    /// Dense reference: every feature, every midpoint, no sparsity tricks.
    fn dense_best_split(x: &[Vec<f64>], r: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
        let n = r.len();
        let total: f64 = r.iter().sum();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|row| row[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let (mut nl, mut sl) = (0usize, 0.0);
                for i in 0..n {
                    if x[i][j] < t {
                        nl += 1;
                        sl += r[i];
                    }
                }
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - total * total / n as f64;
                if gain > 0.0 && best.is_none_or(|b| gain > b.2 + 1e-9) {
                    best = Some((j, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn sparse_scan_matches_dense_scan() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 60;
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..6)
                        .map(|_| {
                            let u: f64 = rng.random();
                            if u < 0.5 { 0.0 } else { rng.random_range(-3i32..4) as f64 }
                        })
                        .collect()
                })
                .collect();
            let y: Vec<f64> = x.iter().map(|r| 2.0 * r[2] - r[4] + rng.random::<f64>()).collect();
            let params = TreeParams { max_depth: 1, rounds: 1, min_leaf: 5, learning_rate: 1.0 };
            let m = train_boosted_trees(&rows(&x), &y, params).unwrap();
            let mean = y.iter().sum::<f64>() / n as f64;
            let r: Vec<f64> = y.iter().map(|v| v - mean).collect();
            let expect = dense_best_split(&x, &r, 5);
            match (&m.trees.first(), expect) {
                (Some(TreeNode::Split { feature, threshold, .. }), Some((j, t, _))) => {
                    assert_eq!(*feature, j);
                    assert!((threshold - t).abs() < 1e-12);
                }
                (None, None) => {}
                (got, want) => panic!("{got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn depth_is_bounded() {
        let x: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64, (i % 13) as f64]).collect();
        let y: Vec<f64> = (0..400).map(|i| ((i * 37) % 101) as f64).collect();
        let m = train_boosted_trees(&rows(&x), &y, TreeParams { rounds: 20, ..Default::default() }).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
        m.validate().unwrap();
    }
}
