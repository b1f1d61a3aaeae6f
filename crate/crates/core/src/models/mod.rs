//! Model zoo: random forest, gradient-boosted trees and a feed-forward
//! network behind one train/predict interface. Nothing is pretrained; every
//! model is fitted from scratch on the encoded training table.

pub mod forest;
pub mod gbdt;
mod importance;
pub mod mlp;
pub mod tree;

pub use forest::{Forest, ForestParams, MaxFeatures};
pub use gbdt::{Gbdt, GbdtParams};
pub use importance::{permutation_importance, permutation_importance_table, FeatureImportance};
pub use mlp::{MlpParams, Network};

use crate::matrix::{Dataset, Matrix};
use crate::table::Table;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    RandomForest,
    Gbdt,
    Mlp,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Gbdt => "gbdt",
            ModelFamily::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Hyperparameters {
    RandomForest(ForestParams),
    Gbdt(GbdtParams),
    Mlp(MlpParams),
}

impl Hyperparameters {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparameters::RandomForest(_) => ModelFamily::RandomForest,
            Hyperparameters::Gbdt(_) => ModelFamily::Gbdt,
            Hyperparameters::Mlp(_) => ModelFamily::Mlp,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidHyperparameter(msg.to_string()));
        match self {
            Hyperparameters::RandomForest(p) => {
                if p.trees == 0 {
                    return bad("forest needs at least one tree");
                }
                if p.max_depth == Some(0) || p.min_samples_leaf == 0 {
                    return bad("forest depth and leaf size must be positive");
                }
                if let MaxFeatures::Fraction(f) = p.max_features {
                    if !(f > 0.0 && f <= 1.0) {
                        return bad("max_features fraction must lie in (0, 1]");
                    }
                }
            }
            Hyperparameters::Gbdt(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    return bad("learning_rate must lie in (0, 1]");
                }
                if p.max_depth == 0 || p.min_samples_leaf == 0 {
                    return bad("gbdt depth and leaf size must be positive");
                }
                if !(p.subsample > 0.0 && p.subsample <= 1.0) || p.lambda < 0.0 {
                    return bad("subsample must lie in (0, 1] and lambda be non-negative");
                }
            }
            Hyperparameters::Mlp(p) => {
                if p.hidden.is_empty() || p.hidden.iter().any(|&u| u == 0) {
                    return bad("mlp needs at least one non-empty hidden layer");
                }
                if !(p.learning_rate > 0.0) || p.batch_size == 0 || !(0.0..1.0).contains(&p.momentum) {
                    return bad("mlp learning_rate, batch_size or momentum out of range");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub task: Task,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn family(&self) -> ModelFamily {
        self.hyperparameters.family()
    }

    /// Stable text key used to break ties when sorting specs.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedState {
    RandomForest(Forest),
    Gbdt(Gbdt),
    Mlp(Network),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations_run: usize,
    /// Round or epoch whose state was kept; `None` without early stopping.
    pub early_stop_at: Option<usize>,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

/// A fitted predictor. Immutable after training; safe to share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub state: FittedState,
    pub meta: TrainingMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("{0} requires a non-empty validation table")]
    MissingValidation(ModelFamily),
    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("training table is empty")]
    Empty,
    #[error("table is not model-ready: {0}")]
    NotEncoded(String),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

fn check_target(task: Task, y: &[f64]) -> Result<(), ModelError> {
    match task {
        Task::BinaryClassification => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(ModelError::DegenerateTarget("classification labels must be 0 or 1".into()));
            }
            let positives = y.iter().filter(|&&v| v == 1.0).count();
            if positives == 0 || positives == y.len() {
                return Err(ModelError::DegenerateTarget(format!(
                    "single class ({} rows, {positives} positive)",
                    y.len()
                )));
            }
        }
        Task::Regression => {
            let first = y[0];
            if y.iter().all(|&v| v == first) {
                return Err(ModelError::DegenerateTarget(format!("zero-variance target (all {first})")));
            }
        }
    }
    Ok(())
}

/// Trains on encoded tables (see [`crate::preprocess::apply_plan`]).
pub fn train(spec: &ModelSpec, train: &Table, validation: &Table) -> Result<TrainedModel, ModelError> {
    let train = Dataset::from_encoded(train).map_err(ModelError::NotEncoded)?;
    let validation = Dataset::from_encoded(validation).map_err(ModelError::NotEncoded)?;
    fit(spec, &train, Some(&validation))
}

/// Trains on datasets, rejecting degenerate targets.
pub fn fit(spec: &ModelSpec, train: &Dataset, validation: Option<&Dataset>) -> Result<TrainedModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::Empty);
    }
    check_target(spec.task, &train.y)?;
    fit_unchecked(spec, train, validation)
}

/// [`fit`] without the degenerate-target check.
pub fn fit_unchecked(
    spec: &ModelSpec,
    train: &Dataset,
    validation: Option<&Dataset>,
) -> Result<TrainedModel, ModelError> {
    spec.hyperparameters.validate()?;
    if let Some(v) = validation {
        if v.feature_names != train.feature_names {
            return Err(ModelError::LayoutMismatch("validation columns differ from training".into()));
        }
    }
    let val = validation.filter(|v| !v.is_empty()).map(|v| (&v.x, v.y.as_slice()));
    let (state, meta) = match &spec.hyperparameters {
        Hyperparameters::RandomForest(p) => {
            let forest = Forest::fit(&train.x, &train.y, p, spec.seed);
            let meta = TrainingMeta {
                iterations_run: forest.trees.len(),
                ..Default::default()
            };
            (FittedState::RandomForest(forest), meta)
        }
        Hyperparameters::Gbdt(p) => {
            if val.is_none() && p.patience < p.rounds {
                return Err(ModelError::MissingValidation(ModelFamily::Gbdt));
            }
            let (model, trace) = Gbdt::fit(spec.task, &train.x, &train.y, val, p, spec.seed);
            let meta = TrainingMeta {
                iterations_run: trace.rounds_run,
                early_stop_at: val.map(|_| trace.best_round),
                train_loss: trace.train_loss,
                validation_loss: trace.validation_loss,
            };
            (FittedState::Gbdt(model), meta)
        }
        Hyperparameters::Mlp(p) => {
            if val.is_none() && p.patience < p.epochs {
                return Err(ModelError::MissingValidation(ModelFamily::Mlp));
            }
            let (net, trace) = Network::fit(spec.task, &train.x, &train.y, val, p, spec.seed);
            let meta = TrainingMeta {
                iterations_run: trace.epochs_run,
                early_stop_at: val.map(|_| trace.best_epoch),
                train_loss: trace.train_loss,
                validation_loss: trace.validation_loss,
            };
            (FittedState::Mlp(net), meta)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_names: train.feature_names.clone(),
        state,
        meta,
    })
}

impl TrainedModel {
    /// Predictions for a raw matrix in this model's feature layout.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.feature_names.len() {
            return Err(ModelError::LayoutMismatch(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.cols()
            )));
        }
        Ok(match &self.state {
            FittedState::RandomForest(f) => f.predict(x),
            FittedState::Gbdt(g) => g.predict(x),
            FittedState::Mlp(n) => n.predict(x),
        })
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        if data.feature_names != self.feature_names {
            return Err(ModelError::LayoutMismatch("feature names differ from training".into()));
        }
        self.predict_matrix(&data.x)
    }

    pub fn task(&self) -> Task {
        self.spec.task
    }
}

/// Regression values or class-1 probabilities for an encoded table.
pub fn predict(model: &TrainedModel, rows: &Table) -> Result<Vec<f64>, ModelError> {
    let data = Dataset::from_encoded(rows).map_err(ModelError::NotEncoded)?;
    model.predict_dataset(&data)
}
