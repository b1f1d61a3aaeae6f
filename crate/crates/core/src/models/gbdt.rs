//! Gradient-boosted trees with Newton leaf weights and L2 regularisation.
//!
//! Squared loss for regression (base score = target mean), logistic loss for
//! classification (base score = log-odds of the positive rate). Each round
//! fits one tree to the current gradients and hessians; its outputs are
//! scaled by the learning rate when predicting, so the margin after `k + 1`
//! rounds is exactly the margin after `k` plus `learning_rate * tree_k`.

use super::tree::{grow, SortedIndex, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng;
use crate::Task;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub subsample: f64,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 500,
            learning_rate: 0.05,
            max_depth: 4,
            min_samples_leaf: 2,
            min_child_weight: 1e-3,
            lambda: 1.0,
            subsample: 0.8,
            patience: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub task: Task,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoostingTrace {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_round: usize,
    pub rounds_run: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn loss(task: Task, y: &[f64], margin: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    match task {
        Task::Regression => y.iter().zip(margin).map(|(t, m)| (t - m).powi(2)).sum::<f64>() / n,
        Task::BinaryClassification => {
            y.iter()
                .zip(margin)
                .map(|(t, m)| {
                    // log(1 + e^m) - t*m, stable form
                    let softplus = if *m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
                    softplus - t * m
                })
                .sum::<f64>()
                / n
        }
    }
}

impl Gbdt {
    pub fn base_score(task: Task, y: &[f64]) -> f64 {
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        match task {
            Task::Regression => mean,
            Task::BinaryClassification => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        }
    }

    /// Fits with early stopping on `validation` when it has rows; the
    /// returned ensemble is truncated to the best validation round.
    pub fn fit(
        task: Task,
        x: &Matrix,
        y: &[f64],
        validation: Option<(&Matrix, &[f64])>,
        params: &GbdtParams,
        seed: u64,
    ) -> (Gbdt, BoostingTrace) {
        let n = y.len();
        let index = SortedIndex::new(x);
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: params.min_samples_leaf,
            min_child_weight: params.min_child_weight,
            lambda: params.lambda,
            min_gain: 0.0,
            max_features: None,
        };
        let mut model = Gbdt {
            task,
            base_score: Self::base_score(task, y),
            learning_rate: params.learning_rate,
            trees: Vec::new(),
        };
        let mut margin = vec![model.base_score; n];
        let validation = validation.filter(|(vx, _)| vx.rows() > 0);
        let mut val_margin = validation.map(|(vx, _)| vec![model.base_score; vx.rows()]);
        let mut trace = BoostingTrace::default();
        let mut best_loss = validation.map_or(f64::INFINITY, |(_, vy)| loss(task, vy, val_margin.as_ref().unwrap()));
        let mut since_best = 0;
        let sample_size = ((n as f64 * params.subsample).round() as usize).clamp(1, n);

        for round in 0..params.rounds {
            let samples: Vec<usize> = if sample_size < n {
                let mut rng = rng::rng(rng::derive_seed(seed, "gbdt-round", round as u64));
                let mut all: Vec<usize> = (0..n).collect();
                rng::shuffle(&mut all, &mut rng);
                all.truncate(sample_size);
                all.sort_unstable();
                all
            } else {
                (0..n).collect()
            };
            let (grad, hess): (Vec<f64>, Vec<f64>) = samples
                .iter()
                .map(|&r| match task {
                    Task::Regression => (margin[r] - y[r], 1.0),
                    Task::BinaryClassification => {
                        let p = sigmoid(margin[r]);
                        (p - y[r], (p * (1.0 - p)).max(1e-12))
                    }
                })
                .unzip();
            let tree = grow(x, &index, &samples, &grad, &hess, &tree_params, None);
            for (r, m) in margin.iter_mut().enumerate() {
                *m += model.learning_rate * tree.predict_row(x, r);
            }
            trace.train_loss.push(loss(task, y, &margin));
            model.trees.push(tree);
            trace.rounds_run = round + 1;

            if let (Some((vx, vy)), Some(vm)) = (validation, val_margin.as_mut()) {
                let tree = model.trees.last().unwrap();
                for (r, m) in vm.iter_mut().enumerate() {
                    *m += model.learning_rate * tree.predict_row(vx, r);
                }
                let l = loss(task, vy, vm);
                trace.validation_loss.push(l);
                if l < best_loss {
                    best_loss = l;
                    trace.best_round = round + 1;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= params.patience.max(1) {
                        break;
                    }
                }
            } else {
                trace.best_round = round + 1;
            }
        }
        model.trees.truncate(trace.best_round);
        (model, trace)
    }

    /// Margin after the first `rounds` trees.
    pub fn margin_rounds(&self, x: &Matrix, rounds: usize) -> Vec<f64> {
        (0..x.rows())
            .map(|r| {
                let mut m = self.base_score;
                for tree in &self.trees[..rounds.min(self.trees.len())] {
                    m += self.learning_rate * tree.predict_row(x, r);
                }
                m
            })
            .collect()
    }

    pub fn margin(&self, x: &Matrix) -> Vec<f64> {
        self.margin_rounds(x, self.trees.len())
    }

    /// Regression values or class-1 probabilities.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let m = self.margin(x);
        match self.task {
            Task::Regression => m,
            Task::BinaryClassification => m.into_iter().map(sigmoid).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..80).map(|i| vec![(i % 10) as f64, (i / 10) as f64]).collect();
        let y = rows.iter().map(|r| r[0] * 0.5 + (r[1] - 3.0).powi(2)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn constant_target_predicts_mean_after_one_round() {
        let (x, _) = toy();
        let y = vec![3.5; x.rows()];
        let params = GbdtParams {
            rounds: 1,
            ..Default::default()
        };
        let (model, _) = Gbdt::fit(Task::Regression, &x, &y, None, &params, 0);
        assert!(model.predict(&x).iter().all(|&p| p == 3.5));
    }

    #[test]
    fn zero_rounds_is_base_score() {
        let (x, y) = toy();
        let params = GbdtParams {
            rounds: 0,
            ..Default::default()
        };
        let (model, _) = Gbdt::fit(Task::Regression, &x, &y, None, &params, 0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(model.predict(&x).iter().all(|&p| p == mean));

        let labels: Vec<f64> = (0..x.rows()).map(|i| (i % 4 == 0) as u8 as f64).collect();
        let (model, _) = Gbdt::fit(Task::BinaryClassification, &x, &labels, None, &params, 0);
        assert!((model.margin(&x)[0] - (0.25f64 / 0.75).ln()).abs() < 1e-15);
        assert!((model.predict(&x)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn training_loss_decreases() {
        let (x, y) = toy();
        let (_, trace) = Gbdt::fit(Task::Regression, &x, &y, None, &GbdtParams::default(), 1);
        assert!(trace.train_loss.last().unwrap() < &(trace.train_loss[0] * 0.1));
    }

    #[test]
    fn early_stopping_keeps_best_round() {
        let (x, y) = toy();
        // validation target unrelated to training target: best round is early
        let vy: Vec<f64> = y.iter().map(|v| -v).collect();
        let params = GbdtParams {
            rounds: 300,
            patience: 10,
            ..Default::default()
        };
        let (model, trace) = Gbdt::fit(Task::Regression, &x, &y, Some((&x, &vy)), &params, 1);
        assert!(trace.rounds_run < 300);
        assert_eq!(model.trees.len(), trace.best_round);
        assert_eq!(trace.rounds_run, trace.best_round + 10);
    }
}
