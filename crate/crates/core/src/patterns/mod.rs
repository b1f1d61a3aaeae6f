//! Subgroup patterns: conjunctions of feature conditions whose rows shift the
//! target's mean, positive-class odds or spread.
//!
//! Candidates come from a quantile grid over the most important features and
//! are searched level by level with a beam; each emitted pattern is then
//! re-tested on the holdout, adjusted for multiple testing, and classified
//! as a discovery (holds on the holdout) or a hypothesis (holds on train and
//! the model agrees).

mod condition;
mod evidence;
mod mask;
mod mining;

pub use condition::{bind_conditions, bind_quantile, cmp_conjunctions, quantile_sorted, Condition, ConditionForm};
pub use evidence::{abs_deviations, evaluate_pattern, Effect, EffectFamily, Evaluator, PatternEvidence};
pub use mask::Mask;
pub use mining::{candidate_conditions, classify_pattern, mine, MiningInput};

use crate::metrics::MetricId;
use crate::models::{self, ModelError, Task, TrainedModel};
use crate::matrix::Dataset;
use crate::preprocess::{apply_plan_rows, PreprocessError, PreprocessPlan};
use crate::table::Table;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PatternError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` has the wrong type for this condition")]
    TypeMismatch(String),
    #[error("level `{level}` does not occur in `{feature}`")]
    UnknownLevel { feature: String, level: String },
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("table has no target column")]
    NoTarget,
    #[error("target `{0}` has more than two classes")]
    TargetNotBinary(String),
    #[error("{0:?} effects do not apply to this target")]
    EffectMismatch(EffectFamily),
    #[error("no features survive importance ranking")]
    NoFeatures,
    #[error("prediction vectors do not match table lengths")]
    PredictionLength,
    #[error("invalid mining config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Discovery,
    Hypothesis,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    /// Sorted by feature name; one condition per feature.
    pub conditions: Vec<Condition>,
    pub effect: Effect,
    pub kind: PatternKind,
}

impl Pattern {
    pub fn key(&self) -> String {
        pattern_key(&self.conditions)
    }
}

/// Canonical text of a conjunction, used for display and deduplication.
pub fn pattern_key(conditions: &[Condition]) -> String {
    conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" AND ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub beam_width: usize,
    pub max_arity: usize,
    pub n_min: usize,
    pub alpha_discovery: f64,
    pub alpha_hypothesis: f64,
    pub top_k_features: usize,
    pub quantile_grid: Vec<f64>,
    pub variance_effects: bool,
    pub importance_repeats: usize,
    /// A refinement must lower the train p-value by at least this many
    /// orders of magnitude over its parent.
    pub min_refinement_gain: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            beam_width: 20,
            max_arity: 3,
            n_min: 10,
            alpha_discovery: 0.01,
            alpha_hypothesis: 0.05,
            top_k_features: 12,
            quantile_grid: (1..10).map(|i| i as f64 / 10.0).collect(),
            variance_effects: true,
            importance_repeats: 3,
            min_refinement_gain: 1.0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |m: &str| Err(PatternError::Config(m.to_string()));
        if self.beam_width == 0 || self.max_arity == 0 || self.top_k_features == 0 {
            return bad("beam_width, max_arity and top_k_features must be positive");
        }
        if self.n_min == 0 {
            return bad("n_min must be positive");
        }
        for a in [self.alpha_discovery, self.alpha_hypothesis] {
            if !(a > 0.0 && a < 1.0) {
                return bad("significance levels must lie in (0, 1)");
            }
        }
        if self.quantile_grid.is_empty() || self.quantile_grid.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return bad("quantile_grid values must lie in (0, 1)");
        }
        if self.quantile_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("quantile_grid must be strictly increasing");
        }
        if !(self.min_refinement_gain >= 0.0) {
            return bad("min_refinement_gain must be non-negative");
        }
        if self.importance_repeats == 0 {
            return bad("importance_repeats must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: Pattern,
    pub train: PatternEvidence,
    pub holdout: PatternEvidence,
    /// Benjamini-Hochberg adjusted holdout p-value.
    pub adjusted_p: f64,
    /// Model-predicted effect on holdout rows (train and holdout combined
    /// when the holdout has no contrast).
    pub model_effect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningResult {
    pub features_searched: Vec<String>,
    pub candidates_evaluated: usize,
    pub patterns_emitted: usize,
    /// Discoveries and hypotheses in ranking order.
    pub patterns: Vec<MinedPattern>,
}

impl MiningResult {
    pub fn of_kind(&self, kind: PatternKind) -> impl Iterator<Item = &MinedPattern> {
        self.patterns.iter().filter(move |p| p.pattern.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub importance: f64,
}

/// Model predictions for every row of a raw table; `NaN` where the row has
/// no target.
pub fn predict_raw(model: &TrainedModel, plan: &PreprocessPlan, raw: &Table) -> Result<Vec<f64>, PatternError> {
    let prepared = apply_plan_rows(plan, raw, false)?;
    let preds = models::predict(model, &prepared.table)?;
    let mut out = vec![f64::NAN; raw.row_count()];
    for (src, p) in prepared.source_rows.into_iter().zip(preds) {
        out[src] = p;
    }
    Ok(out)
}

/// Permutation importance of each raw feature on the training rows, most
/// important first (ties by name).
pub fn rank_features(
    model: &TrainedModel,
    plan: &PreprocessPlan,
    train: &Table,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureScore>, PatternError> {
    let prepared = apply_plan_rows(plan, train, false)?;
    let data = Dataset::from_encoded(&prepared.table).map_err(ModelError::NotEncoded)?;
    let metric = match model.task() {
        Task::Regression => MetricId::Rmse,
        Task::BinaryClassification => MetricId::Auc,
    };
    let scores = models::permutation_importance(model, &data, &plan.feature_groups(), metric, repeats, seed)?;
    let mut ranked: Vec<FeatureScore> = scores
        .into_iter()
        .map(|s| FeatureScore {
            feature: s.feature,
            importance: s.importance,
        })
        .collect();
    ranked.sort_by(|a, b| b.importance.total_cmp(&a.importance).then_with(|| a.feature.cmp(&b.feature)));
    Ok(ranked)
}

/// Ranks features with `model`, then searches and validates patterns on the
/// raw `train` and `holdout` partitions.
pub fn mine_patterns(
    model: &TrainedModel,
    plan: &PreprocessPlan,
    train: &Table,
    holdout: &Table,
    config: &MiningConfig,
    seed: u64,
) -> Result<(MiningResult, Vec<FeatureScore>), PatternError> {
    config.validate()?;
    let ranking = rank_features(model, plan, train, config.importance_repeats, seed)?;
    let input = MiningInput {
        train,
        holdout,
        ranked_features: ranking.iter().map(|s| s.feature.clone()).collect(),
        train_predictions: predict_raw(model, plan, train)?,
        holdout_predictions: predict_raw(model, plan, holdout)?,
    };
    Ok((mine(&input, config)?, ranking))
}
