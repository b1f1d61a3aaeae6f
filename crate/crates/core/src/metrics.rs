//! Evaluation metrics with stable string ids:
//! `accuracy, f1, precision, recall, auc, rmse, r2, mae`.
//!
//! Classification point metrics threshold scores at 0.5 by default and
//! report F1 for the positive class. AUC is the Mann–Whitney statistic of the
//! scores with ties credited one half. Undefined values (AUC with one class,
//! R² with constant truth) are `None` and serialize as `null`.

use crate::Task;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    Empty,
    #[error("unknown metric id `{0}`")]
    Unknown(String),
    #[error("metric `{metric}` does not apply to {task:?}")]
    WrongTask { metric: MetricId, task: Task },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Accuracy,
    F1,
    Precision,
    Recall,
    Auc,
    Rmse,
    R2,
    Mae,
}

impl MetricId {
    pub const CLASSIFICATION: [MetricId; 5] = [
        MetricId::Accuracy,
        MetricId::F1,
        MetricId::Precision,
        MetricId::Recall,
        MetricId::Auc,
    ];
    pub const REGRESSION: [MetricId; 3] = [MetricId::Rmse, MetricId::R2, MetricId::Mae];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Accuracy => "accuracy",
            MetricId::F1 => "f1",
            MetricId::Precision => "precision",
            MetricId::Recall => "recall",
            MetricId::Auc => "auc",
            MetricId::Rmse => "rmse",
            MetricId::R2 => "r2",
            MetricId::Mae => "mae",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricId::Rmse | MetricId::Mae)
    }

    pub fn task(self) -> Task {
        if Self::REGRESSION.contains(&self) {
            Task::Regression
        } else {
            Task::BinaryClassification
        }
    }

    /// Metrics bounded to [0, 1].
    pub fn is_unit_interval(self) -> bool {
        Self::CLASSIFICATION.contains(&self)
    }

    pub fn check_task(self, task: Task) -> Result<(), MetricError> {
        if self.task() == task {
            Ok(())
        } else {
            Err(MetricError::WrongTask { metric: self, task })
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::CLASSIFICATION
            .iter()
            .chain(&MetricId::REGRESSION)
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub task: Task,
    pub values: BTreeMap<MetricId, Option<f64>>,
}

impl MetricSet {
    pub fn get(&self, id: MetricId) -> Option<f64> {
        self.values.get(&id).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_scores(labels: &[bool], scores: &[f64], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&y, &s) in labels.iter().zip(scores) {
            match (y, s >= threshold) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Probability that a random positive outranks a random negative, ties ½.
pub fn auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

pub fn classification_metrics(labels: &[bool], scores: &[f64], threshold: f64) -> Result<MetricSet, MetricError> {
    if labels.len() != scores.len() {
        return Err(MetricError::LengthMismatch(labels.len(), scores.len()));
    }
    if labels.is_empty() {
        return Err(MetricError::Empty);
    }
    let c = Confusion::from_scores(labels, scores, threshold);
    let values = BTreeMap::from([
        (MetricId::Accuracy, Some(c.accuracy())),
        (MetricId::F1, Some(c.f1())),
        (MetricId::Precision, Some(c.precision())),
        (MetricId::Recall, Some(c.recall())),
        (MetricId::Auc, auc(labels, scores)),
    ]);
    Ok(MetricSet {
        task: Task::BinaryClassification,
        values,
    })
}

pub fn regression_metrics(truth: &[f64], predictions: &[f64]) -> Result<MetricSet, MetricError> {
    if truth.len() != predictions.len() {
        return Err(MetricError::LengthMismatch(truth.len(), predictions.len()));
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = truth.len() as f64;
    let sse: f64 = truth.iter().zip(predictions).map(|(t, p)| (t - p).powi(2)).sum();
    let sae: f64 = truth.iter().zip(predictions).map(|(t, p)| (t - p).abs()).sum();
    let mean = truth.iter().sum::<f64>() / n;
    let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    let values = BTreeMap::from([
        (MetricId::Rmse, Some((sse / n).sqrt())),
        (MetricId::R2, r2),
        (MetricId::Mae, Some(sae / n)),
    ]);
    Ok(MetricSet {
        task: Task::Regression,
        values,
    })
}

/// Metric set for `task`, where classification truth is encoded 0/1.
pub fn evaluate(task: Task, truth: &[f64], predictions: &[f64]) -> Result<MetricSet, MetricError> {
    match task {
        Task::Regression => regression_metrics(truth, predictions),
        Task::BinaryClassification => {
            let labels: Vec<bool> = truth.iter().map(|&t| t >= 0.5).collect();
            classification_metrics(&labels, predictions, DEFAULT_THRESHOLD)
        }
    }
}

/// A single metric value; `None` when undefined.
pub fn score(metric: MetricId, truth: &[f64], predictions: &[f64]) -> Result<Option<f64>, MetricError> {
    Ok(evaluate(metric.task(), truth, predictions)?.get(metric))
}
