//! Bagged CART ensemble. Each tree draws a bootstrap sample (optional) and a
//! random feature subset per node from its own counter-derived seed, so the
//! fitted forest does not depend on how trees are scheduled across workers.
//! Classification trees regress the 0/1 label, leaves hold class-1 fractions
//! and the forest averages them into a probability.

use super::tree::{grow, SortedIndex, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().round() as usize,
            MaxFeatures::Fraction(f) => (p as f64 * f).round() as usize,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 200,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Fraction(0.5),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Training target range. Averages of leaf means lie inside it; clamping
    /// removes rounding excursions of an ulp or so.
    #[serde(default = "unbounded")]
    pub target_range: (f64, f64),
}

fn unbounded() -> (f64, f64) {
    (f64::NEG_INFINITY, f64::INFINITY)
}

impl Forest {
    pub fn fit(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Forest {
        let index = SortedIndex::new(x);
        let n = y.len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(params.max_features.resolve(x.cols())),
            ..TreeParams::default()
        };
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::rng(rng::derive_seed(seed, "forest-tree", t as u64));
                let samples: Vec<usize> = if params.bootstrap {
                    let mut s: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                    s.sort_unstable();
                    s
                } else {
                    (0..n).collect()
                };
                let grad: Vec<f64> = samples.iter().map(|&r| -y[r]).collect();
                let hess = vec![1.0; samples.len()];
                grow(x, &index, &samples, &grad, &hess, &tree_params, Some(&mut rng))
            })
            .collect();
        let target_range = match y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))) {
            (lo, hi) if lo <= hi => (lo, hi),
            _ => unbounded(),
        };
        Forest { trees, target_range }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.rows())
            .into_par_iter()
            .map(|r| {
                let mean = self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>() / k;
                mean.clamp(self.target_range.0, self.target_range.1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unsampled_tree_memorizes() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 30) as f64, (i % 4) as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = (0..30).map(|i| ((i * 13) % 11) as f64 - 3.0).collect();
        let params = ForestParams {
            trees: 1,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
        };
        let f = Forest::fit(&x, &y, &params, 1);
        assert_eq!(f.predict(&x), y);
    }

    #[test]
    fn separable_classification() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 50.0 - 1.0 + 0.005]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
        let params = ForestParams {
            trees: 50,
            ..Default::default()
        };
        let f = Forest::fit(&x, &y, &params, 9);
        let acc = f
            .predict(&x)
            .iter()
            .zip(&y)
            .filter(|(p, t)| (**p >= 0.5) == (**t == 1.0))
            .count();
        assert_eq!(acc, 100);
    }

    #[test]
    fn seeded_and_worker_independent() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 9) as f64, (i % 5) as f64, i as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = (0..60).map(|i| (i % 7) as f64).collect();
        let params = ForestParams {
            trees: 20,
            ..Default::default()
        };
        let a = Forest::fit(&x, &y, &params, 3);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| Forest::fit(&x, &y, &params, 3));
        assert_eq!(a, b);
        assert_ne!(a, Forest::fit(&x, &y, &params, 4));
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(16), 4);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(10), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
    }
}
