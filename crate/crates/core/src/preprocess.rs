//! Cleaning plan fitted on training rows and applied to any table.
//!
//! Numeric features are median-imputed and z-scored, binary features become a
//! single 0/1 column, categorical features are one-hot encoded over the
//! training levels plus a reserved `<unseen>` slot. On training tables only,
//! exact duplicate feature rows are removed (first kept) and rows with a
//! robust z-score `|x - median| / (1.4826 * MAD)` above the threshold on any
//! feature are dropped.

use crate::table::{Column, ColumnData, ColumnKind, ColumnRole, Table, TableError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Suffix of the one-hot column that receives levels absent from training.
pub const UNSEEN_LEVEL: &str = "<unseen>";

const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("training table is empty")]
    EmptyTraining,
    #[error("table has no target column")]
    NoTarget,
    #[error("no usable feature columns remain after cleaning")]
    NoUsableFeatures,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    #[serde(default = "default_true")]
    pub dedup: bool,
    /// Robust z threshold; `None` disables outlier removal.
    #[serde(default = "default_outlier_z")]
    pub outlier_z: Option<f64>,
    /// A column flagging more than this fraction of training rows is treated
    /// as heavy-tailed and exempt from the outlier rule.
    #[serde(default = "default_outlier_column_fraction")]
    pub outlier_max_column_fraction: f64,
}

fn default_true() -> bool {
    true
}

fn default_outlier_z() -> Option<f64> {
    Some(4.0)
}

fn default_outlier_column_fraction() -> f64 {
    0.01
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            dedup: true,
            outlier_z: default_outlier_z(),
            outlier_max_column_fraction: default_outlier_column_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericPlan {
    pub name: String,
    pub impute_value: f64,
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub mad: f64,
    /// Excluded from the outlier rule (zero MAD or heavy tail).
    pub outlier_exempt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedPlan {
    pub name: String,
    /// Training levels; one-hot layouts append the unseen slot after these.
    pub levels: Vec<String>,
    pub impute_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturePlan {
    Numeric(NumericPlan),
    Binary(CodedPlan),
    Categorical(CodedPlan),
}

impl FeaturePlan {
    pub fn name(&self) -> &str {
        match self {
            FeaturePlan::Numeric(p) => &p.name,
            FeaturePlan::Binary(p) | FeaturePlan::Categorical(p) => &p.name,
        }
    }

    /// Names of the encoded columns this feature expands into.
    pub fn encoded_names(&self) -> Vec<String> {
        match self {
            FeaturePlan::Numeric(p) => vec![p.name.clone()],
            FeaturePlan::Binary(p) => vec![p.name.clone()],
            FeaturePlan::Categorical(p) => p
                .levels
                .iter()
                .map(|l| format!("{}={l}", p.name))
                .chain(std::iter::once(format!("{}={UNSEEN_LEVEL}", p.name)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRule {
    pub z_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub target: String,
    pub target_kind: ColumnKind,
    pub features: Vec<FeaturePlan>,
    pub dropped: Vec<DroppedColumn>,
    pub dedup_enabled: bool,
    pub outlier_rule: Option<OutlierRule>,
    pub warnings: Vec<String>,
}

impl PreprocessPlan {
    /// Encoded column names in model-matrix order.
    pub fn encoded_names(&self) -> Vec<String> {
        self.features.iter().flat_map(|f| f.encoded_names()).collect()
    }

    /// For each raw feature, the positions of its encoded columns.
    pub fn feature_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut next = 0;
        self.features
            .iter()
            .map(|f| {
                let width = f.encoded_names().len();
                let group = (next..next + width).collect();
                next += width;
                (f.name().to_string(), group)
            })
            .collect()
    }

    pub fn feature(&self, name: &str) -> Option<&FeaturePlan> {
        self.features.iter().find(|f| f.name() == name)
    }
}

/// An encoded table plus the source row of each of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub table: Table,
    pub source_rows: Vec<usize>,
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Row identity over feature cells, for exact-duplicate detection.
fn row_key(features: &[&Column], row: usize) -> Vec<Option<u64>> {
    features
        .iter()
        .map(|c| {
            if c.missing[row] {
                return None;
            }
            Some(match &c.data {
                ColumnData::Numeric(v) => v[row].to_bits(),
                ColumnData::Categorical { codes, levels } => {
                    // hash the level text so tables with different dictionaries agree
                    let mut h = crate::rng::splitmix64(levels.len() as u64);
                    for b in levels[codes[row] as usize].bytes() {
                        h = crate::rng::splitmix64(h ^ b as u64);
                    }
                    h
                }
            })
        })
        .collect()
}

fn dedup_rows(features: &[&Column], rows: Vec<usize>) -> Vec<usize> {
    let mut seen = HashSet::new();
    rows.into_iter()
        .filter(|&r| seen.insert(row_key(features, r)))
        .collect()
}

fn usable_rows(table: &Table) -> Result<Vec<usize>, PreprocessError> {
    if table.target().is_none() {
        return Err(PreprocessError::NoTarget);
    }
    Ok(table.rows_with_target())
}

fn fit_coded(col: &Column, rows: &[usize]) -> Option<CodedPlan> {
    let (codes, levels) = col.as_codes()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &r in rows {
        if !col.missing[r] {
            *counts.entry(levels[codes[r] as usize].as_str()).or_default() += 1;
        }
    }
    let training_levels: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    if training_levels.len() < 2 {
        return None;
    }
    // mode; ties resolve to the first level in sorted order
    let mut best = 0;
    for (i, l) in training_levels.iter().enumerate() {
        if counts[l.as_str()] > counts[training_levels[best].as_str()] {
            best = i;
        }
    }
    let mut plan = CodedPlan {
        name: col.name().to_string(),
        levels: training_levels,
        impute_level: best,
    };
    if col.kind() == ColumnKind::Binary {
        // keep the table's own level order so code 1 stays the positive level
        plan.levels = levels
            .iter()
            .filter(|l| counts.contains_key(l.as_str()))
            .cloned()
            .collect();
        let mode = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(l, _)| *l)
            .unwrap_or_default();
        plan.impute_level = plan.levels.iter().position(|l| l == mode).unwrap_or(0);
    }
    Some(plan)
}

/// Fits the cleaning plan on training rows only.
pub fn fit_plan(train: &Table, options: &PreprocessOptions) -> Result<PreprocessPlan, PreprocessError> {
    if train.row_count() == 0 {
        return Err(PreprocessError::EmptyTraining);
    }
    let target = train.target().ok_or(PreprocessError::NoTarget)?;
    let mut rows = usable_rows(train)?;
    if rows.is_empty() {
        return Err(PreprocessError::EmptyTraining);
    }
    let feature_cols: Vec<&Column> = train.features().collect();
    if options.dedup {
        rows = dedup_rows(&feature_cols, rows);
    }
    let mut features = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for col in &feature_cols {
        let present = rows.iter().filter(|&&r| !col.missing[r]).count();
        if present == 0 {
            warnings.push(format!("column `{}` has no values in training rows; dropped", col.name()));
            dropped.push(DroppedColumn {
                name: col.name().to_string(),
                reason: "all values missing".into(),
            });
            continue;
        }
        let plan = match col.kind() {
            ColumnKind::Numeric => fit_numeric(col, &rows, options),
            ColumnKind::Binary => fit_coded(col, &rows).map(FeaturePlan::Binary),
            ColumnKind::Categorical => fit_coded(col, &rows).map(FeaturePlan::Categorical),
        };
        match plan {
            Some(p) => features.push(p),
            None => dropped.push(DroppedColumn {
                name: col.name().to_string(),
                reason: "constant in training rows".into(),
            }),
        }
    }
    if features.is_empty() {
        return Err(PreprocessError::NoUsableFeatures);
    }
    Ok(PreprocessPlan {
        target: target.name().to_string(),
        target_kind: target.kind(),
        features,
        dropped,
        dedup_enabled: options.dedup,
        outlier_rule: options.outlier_z.map(|z_threshold| OutlierRule { z_threshold }),
        warnings,
    })
}

fn fit_numeric(col: &Column, rows: &[usize], options: &PreprocessOptions) -> Option<FeaturePlan> {
    let values = col.as_numeric()?;
    let mut present: Vec<f64> = rows
        .iter()
        .filter(|&&r| !col.missing[r])
        .map(|&r| values[r])
        .collect();
    let median = median_of(&mut present);
    let imputed: Vec<f64> = rows
        .iter()
        .map(|&r| if col.missing[r] { median } else { values[r] })
        .collect();
    let n = imputed.len() as f64;
    let mean = imputed.iter().sum::<f64>() / n;
    let stddev = (imputed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(stddev > 1e-12 * mean.abs().max(1.0)) {
        return None;
    }
    let mut deviations: Vec<f64> = present.iter().map(|v| (v - median).abs()).collect();
    let mad = median_of(&mut deviations);
    let mut exempt = mad <= 0.0;
    if let (Some(z), false) = (options.outlier_z, exempt) {
        let flagged = present
            .iter()
            .filter(|v| ((*v - median) / (MAD_SCALE * mad)).abs() > z)
            .count();
        exempt = flagged as f64 > options.outlier_max_column_fraction * rows.len() as f64;
    }
    Some(FeaturePlan::Numeric(NumericPlan {
        name: col.name().to_string(),
        impute_value: median,
        mean,
        stddev,
        median,
        mad,
        outlier_exempt: exempt,
    }))
}

/// Applies the plan, returning only the encoded table.
pub fn apply_plan(plan: &PreprocessPlan, table: &Table, is_training: bool) -> Result<Table, PreprocessError> {
    apply_plan_rows(plan, table, is_training).map(|p| p.table)
}

/// Applies the plan and reports which source row each output row came from.
///
/// Rows with a missing target are always dropped. Deduplication and outlier
/// removal run only when `is_training`; every other step is row-local.
pub fn apply_plan_rows(
    plan: &PreprocessPlan,
    table: &Table,
    is_training: bool,
) -> Result<Prepared, PreprocessError> {
    let columns: Vec<&Column> = plan
        .features
        .iter()
        .map(|f| {
            let col = table
                .column(f.name())
                .ok_or_else(|| PreprocessError::SchemaMismatch(format!("missing column `{}`", f.name())))?;
            let ok = matches!(
                (f, col.kind()),
                (FeaturePlan::Numeric(_), ColumnKind::Numeric)
                    | (FeaturePlan::Binary(_), ColumnKind::Binary)
                    | (FeaturePlan::Categorical(_), ColumnKind::Categorical)
            );
            if !ok {
                return Err(PreprocessError::SchemaMismatch(format!(
                    "column `{}` is {:?}",
                    f.name(),
                    col.kind()
                )));
            }
            Ok(col)
        })
        .collect::<Result<_, _>>()?;
    let target = table.column(&plan.target);
    let mut rows: Vec<usize> = match target {
        Some(t) => (0..table.row_count()).filter(|&r| !t.missing[r]).collect(),
        None => (0..table.row_count()).collect(),
    };
    if is_training && plan.dedup_enabled {
        let all_features: Vec<&Column> = table.features().collect();
        rows = dedup_rows(&all_features, rows);
    }
    if let (true, Some(rule)) = (is_training, &plan.outlier_rule) {
        rows.retain(|&r| !is_outlier(plan, &columns, r, rule.z_threshold));
    }

    let encoded: Vec<Vec<Column>> = plan
        .features
        .par_iter()
        .zip(columns.par_iter())
        .map(|(f, col)| encode(f, col, &rows))
        .collect();
    let mut out: Vec<Column> = encoded.into_iter().flatten().collect();
    if let Some(t) = target {
        out.push(t.take(&rows).with_role(ColumnRole::Target));
    }
    Ok(Prepared {
        table: Table::new(out)?,
        source_rows: rows,
    })
}

fn is_outlier(plan: &PreprocessPlan, columns: &[&Column], row: usize, z: f64) -> bool {
    plan.features.iter().zip(columns).any(|(f, col)| match f {
        FeaturePlan::Numeric(p) if !p.outlier_exempt && !col.missing[row] => {
            let v = col.as_numeric().map_or(p.median, |v| v[row]);
            ((v - p.median) / (MAD_SCALE * p.mad)).abs() > z
        }
        _ => false,
    })
}

/// Index of the row's level within the plan's levels, `None` if unseen.
fn plan_level(plan: &CodedPlan, col: &Column, row: usize) -> Option<usize> {
    if col.missing[row] {
        return Some(plan.impute_level);
    }
    let (codes, levels) = col.as_codes()?;
    let text = &levels[codes[row] as usize];
    plan.levels.iter().position(|l| l == text)
}

fn encode(feature: &FeaturePlan, col: &Column, rows: &[usize]) -> Vec<Column> {
    match feature {
        FeaturePlan::Numeric(p) => {
            let values = col.as_numeric().expect("checked numeric");
            let scaled = rows
                .iter()
                .map(|&r| {
                    let v = if col.missing[r] { p.impute_value } else { values[r] };
                    (v - p.mean) / p.stddev
                })
                .collect();
            vec![Column::numeric(p.name.clone(), scaled)]
        }
        FeaturePlan::Binary(p) => {
            let values = rows
                .iter()
                .map(|&r| {
                    let level = plan_level(p, col, r).unwrap_or(p.impute_level);
                    if level == 1 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            vec![Column::numeric(p.name.clone(), values)]
        }
        FeaturePlan::Categorical(p) => {
            let width = p.levels.len() + 1;
            let mut cols = vec![vec![0.0; rows.len()]; width];
            for (i, &r) in rows.iter().enumerate() {
                let slot = plan_level(p, col, r).unwrap_or(p.levels.len());
                cols[slot][i] = 1.0;
            }
            feature
                .encoded_names()
                .into_iter()
                .zip(cols)
                .map(|(name, values)| Column::numeric(name, values))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<Column>, target: &str) -> Table {
        Table::new(cols).unwrap().with_target(target).unwrap()
    }

    fn no_outliers() -> PreprocessOptions {
        PreprocessOptions {
            outlier_z: None,
            ..Default::default()
        }
    }

    #[test]
    fn median_imputation() {
        let t = table(
            vec![
                Column::numeric("a", vec![1.0, 2.0, f64::NAN, 3.0]),
                Column::numeric("y", vec![0.0, 1.0, 2.0, 3.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        match &plan.features[0] {
            FeaturePlan::Numeric(p) => assert_eq!(p.impute_value, 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_column_dropped() {
        let t = table(
            vec![
                Column::numeric("c", vec![5.0, 5.0, 5.0]),
                Column::numeric("a", vec![1.0, 2.0, 3.0]),
                Column::numeric("y", vec![0.0, 1.0, 2.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        assert!(plan.feature("c").is_none());
        assert_eq!(plan.dropped[0].name, "c");
    }

    #[test]
    fn categorical_mode_and_levels() {
        let t = table(
            vec![
                Column::categorical("c", &[Some("x"), Some("x"), Some("y"), None]),
                Column::numeric("y", vec![0.0, 1.0, 2.0, 3.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let f = plan.feature("c").unwrap();
        match f {
            FeaturePlan::Categorical(p) => {
                assert_eq!(p.levels[p.impute_level], "x");
                assert_eq!(p.levels, ["x", "y"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(f.encoded_names(), ["c=x", "c=y", "c=<unseen>"]);
    }

    #[test]
    fn all_missing_column_dropped_with_warning() {
        let t = table(
            vec![
                Column::numeric("m", vec![f64::NAN; 3]),
                Column::numeric("a", vec![1.0, 2.0, 3.0]),
                Column::numeric("y", vec![0.0, 1.0, 2.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        assert_eq!(plan.dropped[0].name, "m");
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn zero_usable_features_is_error() {
        let t = table(
            vec![
                Column::numeric("c", vec![1.0, 1.0]),
                Column::numeric("y", vec![0.0, 1.0]),
            ],
            "y",
        );
        assert!(matches!(
            fit_plan(&t, &no_outliers()),
            Err(PreprocessError::NoUsableFeatures)
        ));
    }

    #[test]
    fn z_scores_have_zero_mean() {
        let t = table(
            vec![
                Column::numeric("a", vec![2.0, 4.0, 6.0]),
                Column::numeric("y", vec![0.0, 1.0, 2.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let out = apply_plan(&plan, &t, true).unwrap();
        let a = out.column("a").unwrap().as_numeric().unwrap();
        assert!(a.iter().sum::<f64>().abs() < 1e-12);
        assert!((a[2] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rows_removed_only_in_training() {
        let t = table(
            vec![
                Column::numeric("a", vec![1.0, 1.0, 2.0, 3.0]),
                Column::numeric("y", vec![0.0, 5.0, 2.0, 3.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let train = apply_plan_rows(&plan, &t, true).unwrap();
        assert_eq!(train.source_rows, [0, 2, 3]);
        let eval = apply_plan_rows(&plan, &t, false).unwrap();
        assert_eq!(eval.source_rows, [0, 1, 2, 3]);
    }

    #[test]
    fn outlier_dropped_in_training_only() {
        // median 0, MAD 1 -> robust z of 9 * 1.4826 is exactly 9
        let mut a: Vec<f64> = (0..200).map(|i| ((i % 5) as f64 - 2.0) * 0.75).collect();
        a[7] = 9.0 * MAD_SCALE * 0.75;
        let y: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let t = table(vec![Column::numeric("a", a), Column::numeric("y", y)], "y");
        let opts = PreprocessOptions {
            dedup: false,
            ..Default::default()
        };
        let plan = fit_plan(&t, &opts).unwrap();
        let train = apply_plan_rows(&plan, &t, true).unwrap();
        assert!(!train.source_rows.contains(&7));
        assert_eq!(train.source_rows.len(), 199);
        let eval = apply_plan_rows(&plan, &t, false).unwrap();
        assert!(eval.source_rows.contains(&7));
    }

    #[test]
    fn heavy_tailed_column_is_exempt() {
        // 10% of rows far out: a tail, not outliers
        let a: Vec<f64> = (0..100).map(|i| if i % 10 == 0 { 1000.0 } else { (i % 7) as f64 }).collect();
        let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = table(vec![Column::numeric("a", a), Column::numeric("y", y)], "y");
        let opts = PreprocessOptions {
            dedup: false,
            ..Default::default()
        };
        let plan = fit_plan(&t, &opts).unwrap();
        let train = apply_plan_rows(&plan, &t, true).unwrap();
        assert_eq!(train.source_rows.len(), 100);
    }

    #[test]
    fn unseen_level_goes_to_reserved_slot() {
        let t = table(
            vec![
                Column::categorical("c", &[Some("x"), Some("y"), Some("x")]),
                Column::numeric("y", vec![0.0, 1.0, 2.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let other = table(
            vec![
                Column::categorical("c", &[Some("z"), Some("y")]),
                Column::numeric("y", vec![0.0, 1.0]),
            ],
            "y",
        );
        let out = apply_plan(&plan, &other, false).unwrap();
        assert_eq!(out.column("c=<unseen>").unwrap().as_numeric().unwrap(), [1.0, 0.0]);
        assert_eq!(out.column("c=y").unwrap().as_numeric().unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn missing_target_rows_dropped() {
        let t = table(
            vec![
                Column::numeric("a", vec![1.0, 2.0, 3.0, 4.0]),
                Column::numeric("y", vec![0.0, f64::NAN, 2.0, 3.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let out = apply_plan_rows(&plan, &t, false).unwrap();
        assert_eq!(out.source_rows, [0, 2, 3]);
    }

    #[test]
    fn schema_mismatch() {
        let t = table(
            vec![
                Column::numeric("a", vec![1.0, 2.0, 3.0]),
                Column::numeric("y", vec![0.0, 1.0, 2.0]),
            ],
            "y",
        );
        let plan = fit_plan(&t, &no_outliers()).unwrap();
        let other = table(
            vec![
                Column::numeric("b", vec![1.0]),
                Column::numeric("y", vec![0.0]),
            ],
            "y",
        );
        assert!(matches!(
            apply_plan(&plan, &other, false),
            Err(PreprocessError::SchemaMismatch(_))
        ));
    }
}
