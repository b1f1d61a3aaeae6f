//! Exact greedy CART on first/second-order statistics.
//!
//! Every sample carries a gradient `g` and hessian `h`. A split's gain is
//! `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)` and a leaf outputs `-G/(H+λ)`.
//! With `g = -y`, `h = 1`, `λ = 0` this is plain variance-reduction CART with
//! mean leaves (the forest); with Newton statistics of a loss it is the
//! boosting learner.
//!
//! Rows go left when `x <= threshold`, and a threshold is always the largest
//! training value on the left side, so any strictly increasing recoding of a
//! feature yields the same partition of every dataset.

use crate::matrix::Matrix;
use crate::rng::Rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub min_gain: f64,
    /// Features tried per node; `None` tries all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_child_weight: 0.0,
            lambda: 0.0,
            min_gain: 0.0,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, x: &Matrix, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(row, feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.predict_row(x, r)).collect()
    }

    /// Features referenced by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Rows of a matrix sorted by each feature, computed once per training set.
#[derive(Debug, Clone)]
pub struct SortedIndex {
    order: Vec<Vec<u32>>,
}

impl SortedIndex {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let col = x.col(j);
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedIndex { order }
    }
}

/// Grows one tree over `samples` (row indices into `x`, repeats allowed).
/// `grad[k]`/`hess[k]` belong to `samples[k]`.
pub fn grow(
    x: &Matrix,
    index: &SortedIndex,
    samples: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
    mut rng: Option<&mut Rng>,
) -> Tree {
    let m = samples.len();
    assert_eq!(grad.len(), m);
    assert_eq!(hess.len(), m);
    if m == 0 {
        return Tree::leaf(0.0);
    }
    // positions of each row within `samples`, CSR layout
    let mut starts = vec![0u32; x.rows() + 1];
    for &r in samples {
        starts[r + 1] += 1;
    }
    for i in 0..x.rows() {
        starts[i + 1] += starts[i];
    }
    let mut fill = starts.clone();
    let mut positions = vec![0u32; m];
    for (k, &r) in samples.iter().enumerate() {
        positions[fill[r] as usize] = k as u32;
        fill[r] += 1;
    }
    // per-feature sample positions ordered by feature value
    let p = x.cols();
    let mut order: Vec<Vec<u32>> = index
        .order
        .iter()
        .map(|rows| {
            let mut out = Vec::with_capacity(m);
            for &r in rows {
                let r = r as usize;
                out.extend_from_slice(&positions[starts[r] as usize..starts[r + 1] as usize]);
            }
            out
        })
        .collect();

    let mut builder = Builder {
        x,
        samples,
        grad,
        hess,
        params,
        nodes: Vec::new(),
        goes_left: vec![false; m],
        scratch: Vec::with_capacity(m),
        features: (0..p).collect(),
    };
    builder.build(&mut order, 0, m, 0, rng.as_deref_mut());
    Tree { nodes: builder.nodes }
}

struct Builder<'a> {
    x: &'a Matrix,
    samples: &'a [usize],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    features: Vec<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.lambda;
        if denom > 0.0 {
            -g / denom
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.lambda;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    /// Builds the node covering `lo..hi` of every order list, returns its id.
    fn build(&mut self, order: &mut [Vec<u32>], lo: usize, hi: usize, depth: usize, rng: Option<&mut Rng>) -> usize {
        let (mut g, mut h) = (0.0, 0.0);
        match order.first() {
            Some(list) => {
                for &k in &list[lo..hi] {
                    g += self.grad[k as usize];
                    h += self.hess[k as usize];
                }
            }
            None => {
                g = self.grad.iter().sum();
                h = self.hess.iter().sum();
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        let n = hi - lo;
        let depth_ok = self.params.max_depth.map_or(true, |d| depth < d);
        if !depth_ok || n < 2 * self.params.min_samples_leaf.max(1) || order.is_empty() {
            return id;
        }
        let mut rng = rng;
        let tried = self.pick_features(rng.as_deref_mut());
        let parent = self.score(g, h);
        let mut best: Option<Candidate> = None;
        for &j in &tried {
            if let Some(c) = self.best_split(&order[j][lo..hi], j, g, h, parent) {
                if best.as_ref().map_or(true, |b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        let floor = self.params.min_gain.max(1e-12 * parent.abs()).max(f64::MIN_POSITIVE);
        let Some(best) = best.filter(|b| b.gain > floor) else {
            return id;
        };
        for &k in &order[best.feature][lo..hi] {
            let row = self.samples[k as usize];
            self.goes_left[k as usize] = self.x.get(row, best.feature) <= best.threshold;
        }
        let mut n_left = 0;
        for list in order.iter_mut() {
            n_left = self.partition(&mut list[lo..hi]);
        }
        let mid = lo + n_left;
        let left = self.build(order, lo, mid, depth + 1, rng.as_deref_mut());
        let right = self.build(order, mid, hi, depth + 1, rng.as_deref_mut());
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn pick_features(&mut self, rng: Option<&mut Rng>) -> Vec<usize> {
        let p = self.features.len();
        match (self.params.max_features, rng) {
            (Some(k), Some(rng)) if k < p => {
                // partial Fisher-Yates over a fresh identity list
                let mut all: Vec<usize> = (0..p).collect();
                for i in 0..k {
                    let j = rng.gen_range(i..p);
                    all.swap(i, j);
                }
                all.truncate(k);
                all
            }
            _ => self.features.clone(),
        }
    }

    /// Stable partition by `goes_left`, returning the left count.
    fn partition(&mut self, slice: &mut [u32]) -> usize {
        self.scratch.clear();
        let mut w = 0;
        for i in 0..slice.len() {
            let k = slice[i];
            if self.goes_left[k as usize] {
                slice[w] = k;
                w += 1;
            } else {
                self.scratch.push(k);
            }
        }
        slice[w..].copy_from_slice(&self.scratch);
        w
    }

    fn best_split(&self, sorted: &[u32], feature: usize, g: f64, h: f64, parent: f64) -> Option<Candidate> {
        let col = self.x.col(feature);
        let n = sorted.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let k = sorted[i] as usize;
            gl += self.grad[k];
            hl += self.hess[k];
            let v = col[self.samples[k]];
            let next = col[self.samples[sorted[i + 1] as usize]];
            if next <= v {
                continue;
            }
            let n_left = i + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                continue;
            }
            let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Candidate {
                    feature,
                    threshold: v,
                    gain,
                });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_mean_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> Tree {
        let samples: Vec<usize> = (0..y.len()).collect();
        let grad: Vec<f64> = y.iter().map(|v| -v).collect();
        let hess = vec![1.0; y.len()];
        grow(x, &SortedIndex::new(x), &samples, &grad, &hess, params, None)
    }

    #[test]
    fn memorizes_distinct_rows() {
        let x = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 0.0], vec![2.0, 5.0], vec![4.0, 2.0]]);
        let y = [7.0, -1.0, 0.5, 2.0];
        let tree = fit_mean_tree(&x, &y, &TreeParams::default());
        assert_eq!(tree.predict(&x), y);
    }

    #[test]
    fn threshold_is_left_max() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![10.0], vec![11.0]]);
        let tree = fit_mean_tree(&x, &[0.0, 0.0, 1.0, 1.0], &TreeParams::default());
        match tree.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 2.0),
            _ => panic!("root should split"),
        }
    }

    #[test]
    fn depth_and_leaf_limits() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = (0..64).map(|i| (i * i % 17) as f64).collect();
        let params = TreeParams {
            max_depth: Some(3),
            ..Default::default()
        };
        assert!(fit_mean_tree(&x, &y, &params).depth() <= 3);
        let params = TreeParams {
            min_samples_leaf: 10,
            ..Default::default()
        };
        let tree = fit_mean_tree(&x, &y, &params);
        // every leaf must cover at least 10 rows
        let preds = tree.predict(&x);
        let mut counts = std::collections::BTreeMap::new();
        for p in preds {
            *counts.entry(p.to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 10));
    }

    #[test]
    fn repeated_samples_weight_the_leaf() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0]]);
        let samples = [0, 0, 1];
        let grad = [-3.0, -3.0, -6.0];
        let hess = [1.0; 3];
        let tree = grow(&x, &SortedIndex::new(&x), &samples, &grad, &hess, &TreeParams::default(), None);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_row(&x, 0), 4.0);
    }

    #[test]
    fn constant_feature_never_split() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let tree = fit_mean_tree(&x, &[0.0, 1.0, 2.0], &TreeParams::default());
        assert_eq!(tree.used_features(), [1]);
    }
}
