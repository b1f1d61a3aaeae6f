//! Permutation importance: mean metric degradation when a feature's columns
//! are shuffled jointly. One-hot groups are shuffled together so a
//! categorical feature gets a single score.

use super::{ModelError, TrainedModel};
use crate::matrix::{Dataset, Matrix};
use crate::metrics::{self, MetricId};
use crate::rng;
use crate::table::Table;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean degradation; positive means the feature helps.
    pub importance: f64,
    pub std: f64,
}

fn metric_value(metric: MetricId, truth: &[f64], predictions: &[f64]) -> Result<f64, ModelError> {
    Ok(metrics::score(metric, truth, predictions)?.unwrap_or(f64::NAN))
}

/// Importance of each named column group of `data`. Groups index columns of
/// `data.x`; each repeat permutes the rows of all columns in a group with
/// one shared permutation.
pub fn permutation_importance(
    model: &TrainedModel,
    data: &Dataset,
    groups: &[(String, Vec<usize>)],
    metric: MetricId,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>, ModelError> {
    if repeats == 0 {
        return Err(ModelError::InvalidHyperparameter("importance repeats must be at least 1".into()));
    }
    metric.check_task(model.task())?;
    if data.is_empty() {
        return Err(ModelError::Empty);
    }
    let baseline = metric_value(metric, &data.y, &model.predict_dataset(data)?)?;
    let sign = if metric.higher_is_better() { 1.0 } else { -1.0 };

    let jobs: Vec<(usize, usize)> = (0..groups.len()).flat_map(|g| (0..repeats).map(move |r| (g, r))).collect();
    let drops: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let mut rng = rng::rng(rng::derive_seed(rng::derive_seed(seed, "importance", g as u64), "repeat", r as u64));
            let mut perm: Vec<usize> = (0..data.len()).collect();
            rng::shuffle(&mut perm, &mut rng);
            let mut x: Matrix = data.x.clone();
            for &c in &groups[g].1 {
                let original = data.x.col(c);
                let target = x.col_mut(c);
                for (i, &p) in perm.iter().enumerate() {
                    target[i] = original[p];
                }
            }
            let shuffled = metric_value(metric, &data.y, &model.predict_matrix(&x)?)?;
            let drop = sign * (baseline - shuffled);
            Ok(if drop.is_nan() { 0.0 } else { drop })
        })
        .collect::<Result<_, ModelError>>()?;

    Ok(groups
        .iter()
        .enumerate()
        .map(|(g, (name, _))| {
            let d = &drops[g * repeats..(g + 1) * repeats];
            let mean = d.iter().sum::<f64>() / repeats as f64;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / repeats as f64;
            FeatureImportance {
                feature: name.clone(),
                importance: mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// Per-column importance on an encoded table, one group per column.
pub fn permutation_importance_table(
    model: &TrainedModel,
    holdout: &Table,
    metric: MetricId,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>, ModelError> {
    let data = Dataset::from_encoded(holdout).map_err(ModelError::NotEncoded)?;
    let groups: Vec<(String, Vec<usize>)> =
        data.feature_names.iter().enumerate().map(|(i, n)| (n.clone(), vec![i])).collect();
    permutation_importance(model, &data, &groups, metric, repeats, seed)
}
