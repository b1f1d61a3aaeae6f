//! Seeded random search over the model zoo.
//!
//! Candidates are drawn from fixed per-family grids, trained on a fit
//! portion of the training partition and scored on a validation portion
//! carved from it; the final holdout is never seen here. The winner is
//! refitted on the whole training partition with its early-stopping point
//! frozen.

use crate::matrix::Dataset;
use crate::metrics::{self, MetricId, MetricSet};
use crate::models::{
    self, ForestParams, GbdtParams, Hyperparameters, MaxFeatures, MlpParams, ModelError, ModelFamily, ModelSpec,
    Task, TrainedModel,
};
use crate::rng::{self, Rng};
use crate::table::Table;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    pub max_candidates: usize,
    /// Families sampled round-robin until `max_candidates` is reached.
    pub families: Vec<ModelFamily>,
    /// Soft limit: candidates not yet started when it passes are skipped.
    pub time_limit_secs: Option<f64>,
    pub validation_fraction: f64,
    /// Absolute train-minus-validation gap that flags overfitting for
    /// metrics where higher is better.
    pub overfit_gap: f64,
    /// Relative gap `(validation - train) / validation` for error metrics.
    pub overfit_relative: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_candidates: 30,
            families: vec![ModelFamily::RandomForest, ModelFamily::Gbdt, ModelFamily::Mlp],
            time_limit_secs: None,
            validation_fraction: 0.2,
            overfit_gap: 0.15,
            overfit_relative: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AutomlError {
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("no candidate trained successfully ({0} failures)")]
    NoCandidates(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub spec: ModelSpec,
    pub validation: MetricSet,
    pub train: MetricSet,
    /// Primary metric on validation; `None` when undefined.
    pub score: Option<f64>,
    pub train_score: Option<f64>,
    pub overfit_gap: Option<f64>,
    pub overfit: bool,
    pub iterations_run: usize,
    pub early_stop_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub primary_metric: MetricId,
    /// Best validation score first.
    pub entries: Vec<LeaderboardEntry>,
    pub best_index: usize,
    pub all_overfit: bool,
    pub failures: Vec<String>,
    pub skipped: usize,
}

impl Leaderboard {
    pub fn best(&self) -> &LeaderboardEntry {
        &self.entries[self.best_index]
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub leaderboard: Leaderboard,
    /// Best candidate refitted on the whole training partition.
    pub model: TrainedModel,
    pub warnings: Vec<String>,
}

fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// One random draw from a family's grid.
pub fn sample_hyperparameters(family: ModelFamily, rng: &mut Rng) -> Hyperparameters {
    match family {
        ModelFamily::RandomForest => Hyperparameters::RandomForest(ForestParams {
            trees: rng.gen_range(100..=500),
            max_depth: *[Some(4), Some(6), Some(8), Some(12), Some(16), None].choose(rng).unwrap(),
            min_samples_leaf: *[1, 2, 4].choose(rng).unwrap(),
            max_features: *[
                MaxFeatures::Sqrt,
                MaxFeatures::Fraction(0.33),
                MaxFeatures::Fraction(0.5),
                MaxFeatures::All,
            ]
            .choose(rng)
            .unwrap(),
            bootstrap: true,
        }),
        ModelFamily::Gbdt => Hyperparameters::Gbdt(GbdtParams {
            rounds: log_uniform(rng, 100.0, 2000.0).round() as usize,
            learning_rate: log_uniform(rng, 0.01, 0.3),
            max_depth: rng.gen_range(2..=8),
            min_samples_leaf: *[1, 2, 5, 10].choose(rng).unwrap(),
            min_child_weight: 1e-3,
            lambda: *[0.0, 1.0, 5.0].choose(rng).unwrap(),
            subsample: *[0.7, 0.85, 1.0].choose(rng).unwrap(),
            patience: 50,
        }),
        ModelFamily::Mlp => {
            let units = *[32, 64, 128].choose(rng).unwrap();
            let layers = rng.gen_range(1..=3);
            Hyperparameters::Mlp(MlpParams {
                hidden: vec![units; layers],
                learning_rate: log_uniform(rng, 1e-3, 3e-2),
                momentum: 0.9,
                l2: *[1e-5, 1e-4, 1e-3].choose(rng).unwrap(),
                epochs: 200,
                batch_size: *[32, 64].choose(rng).unwrap(),
                patience: 20,
            })
        }
    }
}

/// Candidate specs for a budget, in draw order.
pub fn candidate_specs(task: Task, budget: &SearchBudget) -> Vec<ModelSpec> {
    let mut rng = rng::rng(rng::derive_seed(budget.seed, "automl-grid", 0));
    (0..budget.max_candidates)
        .map(|i| {
            let family = budget.families[i % budget.families.len()];
            ModelSpec {
                task,
                hyperparameters: sample_hyperparameters(family, &mut rng),
                seed: rng::derive_seed(budget.seed, "automl-candidate", i as u64),
            }
        })
        .collect()
}

/// Overfit gap of a train/validation score pair: absolute for metrics where
/// higher is better, relative to the validation error otherwise.
pub fn overfit_gap(metric: MetricId, train: f64, validation: f64) -> f64 {
    if metric.higher_is_better() {
        train - validation
    } else if validation > 0.0 {
        (validation - train) / validation
    } else {
        0.0
    }
}

pub fn overfit_flag(entry: &LeaderboardEntry, metric: MetricId, budget: &SearchBudget) -> bool {
    let limit = if metric.higher_is_better() {
        budget.overfit_gap
    } else {
        budget.overfit_relative
    };
    entry.overfit_gap.is_some_and(|g| g > limit)
}

fn compare_scores(metric: MetricId, a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) if metric.higher_is_better() => y.total_cmp(&x),
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Sorts best first (ties by spec key) and returns the index of the first
/// entry not flagged as overfit, or 0 when all are flagged.
pub fn rank_entries(entries: &mut [LeaderboardEntry], metric: MetricId) -> usize {
    entries.sort_by(|a, b| compare_scores(metric, a.score, b.score).then_with(|| a.spec.key().cmp(&b.spec.key())));
    entries.iter().position(|e| !e.overfit).unwrap_or(0)
}

/// Indices of a fit/validation split, stratified by label for
/// classification.
fn carve_validation(data: &Dataset, task: Task, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::rng(rng::derive_seed(seed, "automl-validation", 0));
    let strata: Vec<Vec<usize>> = match task {
        Task::BinaryClassification => {
            let (pos, neg): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data.y[i] == 1.0);
            vec![neg, pos]
        }
        Task::Regression => vec![(0..data.len()).collect()],
    };
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for mut s in strata {
        rng::shuffle(&mut s, &mut rng);
        let take = ((s.len() as f64 * fraction).round() as usize).min(s.len().saturating_sub(1));
        let take = if s.len() >= 2 { take.max(1) } else { take };
        val.extend_from_slice(&s[..take]);
        fit.extend_from_slice(&s[take..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Freezes the early-stopping point so the spec can be refitted without a
/// validation set.
fn frozen(spec: &ModelSpec, early_stop_at: Option<usize>) -> ModelSpec {
    let mut spec = spec.clone();
    match (&mut spec.hyperparameters, early_stop_at) {
        (Hyperparameters::Gbdt(p), Some(k)) => {
            p.rounds = k;
            p.patience = p.rounds;
        }
        (Hyperparameters::Mlp(p), Some(k)) => {
            p.epochs = k.max(1);
            p.patience = p.epochs;
        }
        _ => {}
    }
    spec
}

/// Searches on an encoded training table.
pub fn search(train: &Table, task: Task, metric: MetricId, budget: &SearchBudget) -> Result<SearchOutcome, AutomlError> {
    let data = Dataset::from_encoded(train).map_err(ModelError::NotEncoded)?;
    search_dataset(&data, task, metric, budget)
}

pub fn search_dataset(
    data: &Dataset,
    task: Task,
    metric: MetricId,
    budget: &SearchBudget,
) -> Result<SearchOutcome, AutomlError> {
    if budget.max_candidates == 0 || budget.families.is_empty() {
        return Err(AutomlError::Budget("max_candidates and families must be non-empty".into()));
    }
    if !(budget.validation_fraction > 0.0 && budget.validation_fraction < 1.0) {
        return Err(AutomlError::Budget("validation_fraction must lie in (0, 1)".into()));
    }
    metric.check_task(task)?;
    if data.is_empty() {
        return Err(ModelError::Empty.into());
    }
    let (fit_rows, val_rows) = carve_validation(data, task, budget.validation_fraction, budget.seed);
    if fit_rows.is_empty() || val_rows.is_empty() {
        return Err(AutomlError::Budget("training partition too small to carve validation".into()));
    }
    let fit_data = data.take_rows(&fit_rows);
    let val_data = data.take_rows(&val_rows);

    let specs = candidate_specs(task, budget);
    let start = Instant::now();
    let results: Vec<Option<Result<LeaderboardEntry, String>>> = specs
        .par_iter()
        .map(|spec| {
            if budget.time_limit_secs.is_some_and(|t| start.elapsed().as_secs_f64() > t) {
                return None;
            }
            let run = || -> Result<LeaderboardEntry, ModelError> {
                let model = models::fit(spec, &fit_data, Some(&val_data))?;
                let train = metrics::evaluate(task, &fit_data.y, &model.predict_dataset(&fit_data)?)?;
                let validation = metrics::evaluate(task, &val_data.y, &model.predict_dataset(&val_data)?)?;
                let (score, train_score) = (validation.get(metric), train.get(metric));
                let gap = score.zip(train_score).map(|(v, t)| overfit_gap(metric, t, v));
                let mut entry = LeaderboardEntry {
                    spec: spec.clone(),
                    validation,
                    train,
                    score,
                    train_score,
                    overfit_gap: gap,
                    overfit: false,
                    iterations_run: model.meta.iterations_run,
                    early_stop_at: model.meta.early_stop_at,
                };
                entry.overfit = overfit_flag(&entry, metric, budget);
                Ok(entry)
            };
            Some(run().map_err(|e| format!("{} candidate: {e}", spec.family())))
        })
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            None => skipped += 1,
            Some(Ok(e)) => entries.push(e),
            Some(Err(msg)) => failures.push(msg),
        }
    }
    if entries.is_empty() {
        // A degenerate target fails every candidate the same way.
        if let Some(Err(e)) = specs.first().map(|s| models::fit(s, &fit_data, Some(&val_data))) {
            if matches!(e, ModelError::DegenerateTarget(_)) {
                return Err(e.into());
            }
        }
        return Err(AutomlError::NoCandidates(failures.len()));
    }
    let best_index = rank_entries(&mut entries, metric);
    let all_overfit = entries.iter().all(|e| e.overfit);

    let mut warnings = Vec::new();
    if all_overfit {
        warnings.push("every candidate exceeded the overfit threshold; best of the flagged entries kept".to_string());
    }
    if skipped > 0 {
        warnings.push(format!("{skipped} candidates skipped after the time limit"));
    }
    let best = &entries[best_index];
    let model = models::fit(&frozen(&best.spec, best.early_stop_at), data, None)?;
    Ok(SearchOutcome {
        leaderboard: Leaderboard {
            primary_metric: metric,
            entries,
            best_index,
            all_overfit,
            failures,
            skipped,
        },
        model,
        warnings,
    })
}
