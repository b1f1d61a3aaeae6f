#![allow(dead_code)]

use discover::models::{self, ForestParams, Hyperparameters, ModelSpec, TrainedModel};
use discover::patterns::{quantile_sorted, Condition, ConditionForm};
use discover::preprocess::{apply_plan, fit_plan, PreprocessOptions, PreprocessPlan};
use discover::rng;
use discover::table::{split, Column, SplitSpec, Table};
use discover::Task;
use rand::Rng as _;

/// Planted region: x1 > 0.5 and x2 in [0.3, 0.5] (10% of a uniform sample),
/// where the target is shifted by `shift` standard deviations.
pub const PLANT_X1: (f64, f64) = (0.5, 1.0);
pub const PLANT_X2: (f64, f64) = (0.3, 0.5);

pub fn in_plant(x1: f64, x2: f64) -> bool {
    x1 > PLANT_X1.0 && (PLANT_X2.0..=PLANT_X2.1).contains(&x2)
}

pub fn planted_table(rows: usize, features: usize, shift: f64, seed: u64) -> Table {
    let mut r = rng::rng(seed);
    let cols: Vec<Vec<f64>> = (0..features).map(|_| (0..rows).map(|_| r.gen::<f64>()).collect()).collect();
    let y: Vec<f64> = (0..rows)
        .map(|i| rng::standard_normal(&mut r) + if in_plant(cols[0][i], cols[1][i]) { shift } else { 0.0 })
        .collect();
    let mut columns: Vec<Column> = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| Column::numeric(format!("x{}", j + 1), v))
        .collect();
    columns.push(Column::numeric("y", y));
    Table::new(columns).unwrap().with_target("y").unwrap()
}

pub struct Prepared {
    pub train: Table,
    pub holdout: Table,
    pub plan: PreprocessPlan,
    pub model: TrainedModel,
}

/// Split, preprocess and fit a forest: the inputs the miner needs.
pub fn prepare(table: &Table, seed: u64, trees: usize) -> Prepared {
    let spec = SplitSpec {
        holdout_fraction: 0.2,
        stratified: false,
        seed,
    };
    let (train, holdout) = split(table, &spec).unwrap();
    let plan = fit_plan(&train, &PreprocessOptions::default()).unwrap();
    let enc = apply_plan(&plan, &train, true).unwrap();
    let task = if table.target().unwrap().as_numeric().is_some() {
        Task::Regression
    } else {
        Task::BinaryClassification
    };
    let spec = ModelSpec {
        task,
        hyperparameters: Hyperparameters::RandomForest(ForestParams {
            trees,
            min_samples_leaf: 3,
            ..Default::default()
        }),
        seed,
    };
    let model = models::train(&spec, &enc, &enc).unwrap();
    Prepared {
        train,
        holdout,
        plan,
        model,
    }
}

/// Training decile cut points of `feature`, including min and max.
fn deciles(train: &Table, feature: &str) -> Vec<f64> {
    let mut v = train.column(feature).unwrap().present_values();
    v.sort_by(f64::total_cmp);
    (0..=10).map(|k| quantile_sorted(&v, k as f64 / 10.0)).collect()
}

/// True when `value` lies within one decile bin of `truth`: inside the bin
/// holding `truth` or one of its two neighbours.
pub fn within_one_bin(cuts: &[f64], truth: f64, value: f64) -> bool {
    let j = (0..10).find(|&k| truth <= cuts[k + 1]).unwrap_or(9);
    let lo = cuts[j.saturating_sub(1)];
    let hi = cuts[(j + 2).min(10)];
    lo - 1e-12 <= value && value <= hi + 1e-12
}

/// Condition as a closed value range over the training data.
pub fn value_range(cuts: &[f64], c: &Condition) -> (f64, f64) {
    match &c.form {
        ConditionForm::QuantileAbove { threshold, .. } => (*threshold, cuts[10]),
        ConditionForm::QuantileBelow { threshold, .. } => (cuts[0], *threshold),
        ConditionForm::Interval { lo, hi } => (*lo, *hi),
        ConditionForm::CategoryEquals { .. } => (f64::NAN, f64::NAN),
    }
}

/// Same two features as the plant, each bound within one decile bin.
pub fn matches_plant(train: &Table, conditions: &[Condition]) -> bool {
    if conditions.len() != 2 {
        return false;
    }
    let want = [("x1", PLANT_X1), ("x2", PLANT_X2)];
    conditions.iter().zip(want).all(|(c, (name, (lo, hi)))| {
        if c.feature != name {
            return false;
        }
        let cuts = deciles(train, name);
        let (a, b) = value_range(&cuts, c);
        let hi = hi.min(cuts[10]);
        within_one_bin(&cuts, lo, a) && within_one_bin(&cuts, hi, b)
    })
}
