//! Benchmark harness: runs the pipeline on the public benchmark tables and
//! compares holdout scores with published reference values.
//!
//! Reference values are constants; a seed override never changes them.
//!
//! ```
//! use discover::bench::{reference_means, Group};
//! let (theirs, ours) = reference_means(Group::Ozone);
//! assert!((theirs - 0.535).abs() < 5e-4 && (ours - 0.653).abs() < 5e-4);
//! ```

use crate::config::{resolve_path, ConfigError, RunConfig};
use crate::metrics::MetricId;
use crate::pipeline;
use crate::report::RunReport;
use crate::table::read_csv;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid benchmark config {0}")]
    Invalid(String),
    #[error("no rows for group {0}")]
    EmptyGroup(Group),
}

/// A source publication and its dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Hcv,
    Concrete,
    ClimateBeliefs,
    Ozone,
    HearingLoss,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::Hcv,
        Group::Concrete,
        Group::ClimateBeliefs,
        Group::Ozone,
        Group::HearingLoss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Hcv => "hcv",
            Group::Concrete => "concrete",
            Group::ClimateBeliefs => "climate_beliefs",
            Group::Ozone => "ozone",
            Group::HearingLoss => "hearing_loss",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Hcv => "HCV",
            Group::Concrete => "CCS",
            Group::ClimateBeliefs => "Climate Beliefs",
            Group::Ozone => "Ozone",
            Group::HearingLoss => "Hearing Loss",
        }
    }

    /// The metric each source publication evaluated.
    pub fn metric(self) -> MetricId {
        match self {
            Group::Hcv | Group::HearingLoss => MetricId::Accuracy,
            Group::Concrete => MetricId::Rmse,
            Group::ClimateBeliefs | Group::Ozone => MetricId::R2,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedBy {
    /// The dataset's source publication.
    Published,
    /// The reference discovery system.
    Engine,
}

/// Column order of the reference metric table.
pub const REFERENCE_METRICS: [MetricId; 8] = [
    MetricId::Accuracy,
    MetricId::F1,
    MetricId::Precision,
    MetricId::Recall,
    MetricId::Auc,
    MetricId::Rmse,
    MetricId::R2,
    MetricId::Mae,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub group: Group,
    pub target: &'static str,
    pub trained_by: TrainedBy,
    pub model: &'static str,
    /// In `REFERENCE_METRICS` order; `None` where not reported.
    pub values: [Option<f64>; 8],
}

impl ReferenceRow {
    pub fn get(&self, metric: MetricId) -> Option<f64> {
        REFERENCE_METRICS.iter().position(|&m| m == metric).and_then(|i| self.values[i])
    }
}

const fn r2(group: Group, target: &'static str, by: TrainedBy, model: &'static str, v: f64) -> ReferenceRow {
    ReferenceRow {
        group,
        target,
        trained_by: by,
        model,
        values: [None, None, None, None, None, None, Some(v), None],
    }
}

const fn ozone(target: &'static str, theirs: f64, their_model: &'static str, ours: f64) -> [ReferenceRow; 2] {
    [
        r2(Group::Ozone, target, TrainedBy::Published, their_model, theirs),
        r2(Group::Ozone, target, TrainedBy::Engine, "Neural Net", ours),
    ]
}

const fn climate(target: &'static str, theirs: f64, ours: f64) -> [ReferenceRow; 2] {
    [
        r2(Group::ClimateBeliefs, target, TrainedBy::Published, "GBDT", theirs),
        r2(Group::ClimateBeliefs, target, TrainedBy::Engine, "Random Forest", ours),
    ]
}

const fn classification(group: Group, target: &'static str, by: TrainedBy, model: &'static str, v: [f64; 5]) -> ReferenceRow {
    ReferenceRow {
        group,
        target,
        trained_by: by,
        model,
        values: [Some(v[0]), Some(v[1]), Some(v[2]), Some(v[3]), Some(v[4]), None, None, None],
    }
}

const fn concrete(by: TrainedBy, model: &'static str, rmse: f64, mae: f64) -> ReferenceRow {
    ReferenceRow {
        group: Group::Concrete,
        target: "ccs",
        trained_by: by,
        model,
        values: [None, None, None, None, None, Some(rmse), None, Some(mae)],
    }
}

use TrainedBy::{Engine, Published};

const HCV: [ReferenceRow; 2] = [
    classification(Group::Hcv, "Score", Published, "Random Forest", [0.915, 0.905, 0.901, 0.923, 0.990]),
    classification(Group::Hcv, "Score", Engine, "XGBoost", [0.977, 0.977, 0.967, 0.983, 0.977]),
];
const CONCRETE: [ReferenceRow; 2] = [concrete(Published, "LightGBM", 3.26, 2.35), concrete(Engine, "Neural Net", 0.28, 0.21)];
const CLIMATE: [[ReferenceRow; 2]; 4] = [
    climate("ccwept", 0.1, 0.14),
    climate("ccbelief", 0.57, 0.63),
    climate("ccpolicy", 0.46, 0.44),
    climate("ccshare", 0.74, 0.73),
];
const OZONE: [[ReferenceRow; 2]; 15] = [
    ozone("o3_average_values", 0.60, "Random Forest", 0.67),
    ozone("o3_daytime_avg", 0.63, "Random Forest", 0.70),
    ozone("o3_nighttime_avg", 0.59, "Random Forest", 0.71),
    ozone("o3_median", 0.57, "Random Forest", 0.74),
    ozone("o3_perc25", 0.63, "Random Forest", 0.74),
    ozone("o3_perc75", 0.56, "Random Forest", 0.70),
    ozone("o3_perc90", 0.59, "Random Forest", 0.64),
    ozone("o3_perc98", 0.59, "Random Forest", 0.68),
    ozone("o3_dma8eu", 0.58, "Random Forest", 0.68),
    ozone("o3_avgdma8epax", 0.63, "Random Forest", 0.69),
    ozone("o3_drmdmax1h", 0.51, "Random Forest", 0.62),
    ozone("o3_w90", 0.51, "Random Forest", 0.75),
    ozone("o3_aot40", 0.60, "Random Forest", 0.62),
    ozone("o3_nvgt070", 0.32, "Neural Net", 0.24),
    ozone("o3_nvgt100", 0.12, "Neural Net", 0.61),
];
const HEARING: [ReferenceRow; 2] = [
    classification(Group::HearingLoss, "HL", Published, "Random Forest", [0.891, 0.881, 0.896, 0.912, 0.947]),
    classification(Group::HearingLoss, "HL", Engine, "Random Forest", [0.893, 0.892, 0.855, 0.925, 0.895]),
];

/// Every published reference row, in table order.
pub fn reference_table() -> Vec<ReferenceRow> {
    let mut rows = Vec::with_capacity(48);
    rows.extend(HCV);
    rows.extend(CONCRETE);
    CLIMATE.iter().for_each(|p| rows.extend(p));
    OZONE.iter().for_each(|p| rows.extend(p));
    rows.extend(HEARING);
    rows
}

/// Per-group means as published: (source publication, reference system).
pub const PUBLISHED_MEANS: [(Group, f64, f64); 5] = [
    (Group::Hcv, 0.915, 0.977),
    (Group::Concrete, 3.260, 0.280),
    (Group::ClimateBeliefs, 0.468, 0.485),
    (Group::Ozone, 0.535, 0.653),
    (Group::HearingLoss, 0.891, 0.893),
];

/// Targets of a group with their (published, engine) value of the group metric.
pub fn group_references(group: Group) -> Vec<(&'static str, f64, f64)> {
    let rows = reference_table();
    let metric = group.metric();
    let mut out: Vec<(&'static str, f64, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.group == group && r.trained_by == Published) {
        let engine = rows
            .iter()
            .find(|e| e.group == group && e.target == r.target && e.trained_by == Engine)
            .and_then(|e| e.get(metric));
        if let (Some(p), Some(e)) = (r.get(metric), engine) {
            out.push((r.target, p, e));
        }
    }
    out
}

/// Mean of the group metric over a group's targets, recomputed from the
/// per-target references.
pub fn reference_means(group: Group) -> (f64, f64) {
    let refs = group_references(group);
    let n = refs.len() as f64;
    (
        refs.iter().map(|r| r.1).sum::<f64>() / n,
        refs.iter().map(|r| r.2).sum::<f64>() / n,
    )
}

/// (published, engine) reference values of one target for every reported metric.
pub fn target_references(group: Group, target: &str) -> BTreeMap<MetricId, (Option<f64>, Option<f64>)> {
    let rows = reference_table();
    let find = |by| rows.iter().find(|r| r.group == group && r.target == target && r.trained_by == by);
    let (p, e) = (find(Published), find(Engine));
    REFERENCE_METRICS
        .iter()
        .filter_map(|&m| {
            let pair = (p.and_then(|r| r.get(m)), e.and_then(|r| r.get(m)));
            (pair.0.is_some() || pair.1.is_some()).then_some((m, pair))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    /// Freely downloadable; absence means the user has not fetched it yet.
    PublicAuto,
    /// Restricted; the user supplies the CSV.
    UserSupplied,
}

/// One benchmark dataset: a run config plus comparison metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub id: String,
    pub group: Group,
    pub availability: Availability,
    /// Where to obtain the data.
    #[serde(default)]
    pub source: Option<String>,
    /// Targets run from one read of the CSV; defaults to `run.data.target`.
    /// Every listed target is excluded from the features of the others.
    #[serde(default)]
    pub targets: Vec<String>,
    /// Reference-table name of each target where it differs from the CSV
    /// column name.
    #[serde(default)]
    pub reference_names: BTreeMap<String, String>,
    /// Acceptance floor of the group metric per target.
    #[serde(default)]
    pub floors: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub run: RunConfig,
    /// Directory relative data paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl BenchmarkConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<BenchmarkConfig, BenchError> {
        let mut cfg: BenchmarkConfig = toml::from_str(text).map_err(ConfigError::from)?;
        cfg.base = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<BenchmarkConfig, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            BenchError::Config(c) => BenchError::Invalid(format!("{}: {c}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.run.validate()?;
        if let Some(m) = self.run.search.primary_metric {
            if m != self.group.metric() {
                return Err(BenchError::Invalid(format!(
                    "{}: primary metric {m} differs from the group metric {}",
                    self.id,
                    self.group.metric()
                )));
            }
        }
        for t in self.floors.keys() {
            if !self.targets().contains(t) {
                return Err(BenchError::Invalid(format!("{}: floor for unknown target `{t}`", self.id)));
            }
        }
        Ok(())
    }

    pub fn targets(&self) -> Vec<String> {
        if self.targets.is_empty() {
            vec![self.run.data.target.clone()]
        } else {
            self.targets.clone()
        }
    }

    pub fn reference_name<'a>(&'a self, target: &'a str) -> &'a str {
        self.reference_names.get(target).map_or(target, String::as_str)
    }

    /// (published, engine) values of the group metric for a target.
    pub fn references(&self, target: &str) -> (Option<f64>, Option<f64>) {
        target_references(self.group, self.reference_name(target))
            .get(&self.group.metric())
            .copied()
            .unwrap_or((None, None))
    }

    pub fn data_path(&self) -> PathBuf {
        resolve_path(&self.run.data.path, &self.base)
    }
}

/// Loads every `*.toml` in `dir`, sorted by file name.
pub fn load_suite(dir: &Path) -> Result<Vec<BenchmarkConfig>, BenchError> {
    let io = |source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| BenchmarkConfig::load(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ran,
    /// User-supplied data absent.
    Skipped,
    /// Public data not downloaded.
    Unavailable,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub group: Group,
    pub target: String,
    pub metric: MetricId,
    pub published_value: Option<f64>,
    pub engine_value: Option<f64>,
    pub ours: Option<f64>,
    /// `ours - published_value`.
    pub delta: Option<f64>,
    pub floor: Option<f64>,
    pub pass: Option<bool>,
    pub status: RowStatus,
    pub reason: Option<String>,
    pub discoveries: usize,
    pub hypotheses: usize,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub row: ComparisonRow,
    pub report: Option<RunReport>,
    pub data_path: PathBuf,
}

fn base_row(cfg: &BenchmarkConfig, target: &str) -> ComparisonRow {
    let (published_value, engine_value) = cfg.references(target);
    ComparisonRow {
        dataset: cfg.id.clone(),
        group: cfg.group,
        target: target.to_string(),
        metric: cfg.group.metric(),
        published_value,
        engine_value,
        ours: None,
        delta: None,
        floor: cfg.floors.get(target).copied(),
        pass: None,
        status: RowStatus::Failed,
        reason: None,
        discoveries: 0,
        hypotheses: 0,
        runtime_secs: 0.0,
    }
}

/// Does `value` meet `floor` for `metric`?
pub fn meets_floor(metric: MetricId, value: f64, floor: f64) -> bool {
    if metric.higher_is_better() {
        value >= floor
    } else {
        value <= floor
    }
}

/// The run config used for one target of a benchmark.
pub fn target_config(cfg: &BenchmarkConfig, target: &str, columns: &[String], seed: Option<u64>) -> RunConfig {
    let mut run = cfg.run.clone();
    run.data.target = target.to_string();
    for other in cfg.targets() {
        if other != target && columns.contains(&other) && !run.data.ignore.contains(&other) {
            run.data.ignore.push(other);
        }
    }
    if let Some(s) = seed {
        run.seed = s;
    }
    run
}

/// Runs every target of one benchmark. Missing data yields skipped or
/// unavailable rows rather than an error.
pub fn run_benchmark(cfg: &BenchmarkConfig, seed: Option<u64>, timestamp: &str) -> Vec<BenchmarkRun> {
    run_benchmark_targets(cfg, &cfg.targets(), seed, timestamp)
}

/// Runs a subset of a benchmark's targets. Every configured target stays
/// excluded from the features, whether it runs or not.
pub fn run_benchmark_targets(
    cfg: &BenchmarkConfig,
    targets: &[String],
    seed: Option<u64>,
    timestamp: &str,
) -> Vec<BenchmarkRun> {
    let path = cfg.data_path();
    let finish = |mut row: ComparisonRow, status, reason: String| {
        row.status = status;
        row.reason = Some(reason);
        BenchmarkRun {
            row,
            report: None,
            data_path: path.clone(),
        }
    };
    if !path.is_file() {
        let (status, reason) = match cfg.availability {
            Availability::UserSupplied => (
                RowStatus::Skipped,
                format!("user-supplied data not found at {}", path.display()),
            ),
            Availability::PublicAuto => (
                RowStatus::Unavailable,
                format!(
                    "data not found at {}; download it{}",
                    path.display(),
                    cfg.source.as_ref().map(|s| format!(" from {s}")).unwrap_or_default()
                ),
            ),
        };
        return targets
            .iter()
            .map(|t| finish(base_row(cfg, t), status, reason.clone()))
            .collect();
    }
    let raw = match read_csv(&path, &cfg.run.csv_options()) {
        Ok(t) => t,
        Err(e) => {
            return targets
                .iter()
                .map(|t| finish(base_row(cfg, t), RowStatus::Failed, e.to_string()))
                .collect()
        }
    };
    let columns: Vec<String> = raw.columns().iter().map(|c| c.name().to_string()).collect();
    targets
        .iter()
        .map(|target| {
            let start = Instant::now();
            let mut row = base_row(cfg, target);
            let mut run = target_config(cfg, target, &columns, seed);
            let mut notes = Vec::new();
            if let Some(split) = &run.data.split_column {
                if !columns.contains(split) {
                    notes.push(format!("split column `{split}` absent; seeded split used"));
                    run.data.split_column = None;
                }
            }
            let result = pipeline::prepare_data(&run, &raw, path.clone())
                .and_then(|data| pipeline::run_loaded(&run, &data, timestamp));
            row.runtime_secs = start.elapsed().as_secs_f64();
            match result {
                Ok(artifacts) => {
                    let report = artifacts.report;
                    row.status = RowStatus::Ran;
                    row.ours = report.holdout_metrics.get(row.metric);
                    row.delta = row.ours.zip(row.published_value).map(|(o, p)| o - p);
                    row.pass = row.floor.zip(row.ours).map(|(f, o)| meets_floor(row.metric, o, f));
                    row.discoveries = report.discoveries.len();
                    row.hypotheses = report.hypotheses.len();
                    row.reason = (!notes.is_empty()).then(|| notes.join("; "));
                    BenchmarkRun {
                        row,
                        report: Some(report),
                        data_path: path.clone(),
                    }
                }
                Err(e) => finish(row, RowStatus::Failed, e.to_string()),
            }
        })
        .collect()
}

/// Runs several benchmarks in parallel; output keeps the input order.
pub fn run_suite(configs: &[BenchmarkConfig], seed: Option<u64>, timestamp: &str) -> Vec<BenchmarkRun> {
    configs
        .par_iter()
        .map(|c| run_benchmark(c, seed, timestamp))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Keeps the configs whose id or group matches one of `only`.
pub fn filter_suite(configs: Vec<BenchmarkConfig>, only: &[String]) -> Vec<BenchmarkConfig> {
    if only.is_empty() {
        return configs;
    }
    configs
        .into_iter()
        .filter(|c| only.iter().any(|o| o == &c.id || o == c.group.as_str()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: Group,
    pub metric: MetricId,
    /// Mean of the source publication's values over the rows' targets.
    pub published_mean: Option<f64>,
    pub engine_mean: Option<f64>,
    /// Mean of our values over the targets that ran.
    pub ours_mean: Option<f64>,
    pub targets_run: usize,
    pub targets_total: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-group mean of the group metric.
pub fn aggregate_group(group: Group, rows: &[ComparisonRow]) -> Result<AggregateRow, BenchError> {
    let rows: Vec<&ComparisonRow> = rows.iter().filter(|r| r.group == group).collect();
    if rows.is_empty() {
        return Err(BenchError::EmptyGroup(group));
    }
    Ok(AggregateRow {
        group,
        metric: group.metric(),
        published_mean: mean(rows.iter().filter_map(|r| r.published_value)),
        engine_mean: mean(rows.iter().filter_map(|r| r.engine_value)),
        ours_mean: mean(rows.iter().filter_map(|r| r.ours)),
        targets_run: rows.iter().filter(|r| r.status == RowStatus::Ran).count(),
        targets_total: rows.len(),
    })
}

/// Aggregates every group present in `rows`, in first-appearance order.
pub fn aggregate(rows: &[ComparisonRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<Group> = Vec::new();
    for r in rows {
        if !groups.contains(&r.group) {
            groups.push(r.group);
        }
    }
    groups
        .into_iter()
        .map(|g| aggregate_group(g, rows).expect("group has rows"))
        .collect()
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.3}"))
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "group",
        "target",
        "metric",
        "published",
        "engine",
        "ours",
        "delta",
        "floor",
        "pass",
        "status",
        "discoveries",
        "hypotheses",
        "runtime_secs",
        "reason",
    ])
    .expect("in-memory write");
    for r in rows {
        let full = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        w.write_record([
            r.dataset.clone(),
            r.group.to_string(),
            r.target.clone(),
            r.metric.to_string(),
            full(r.published_value),
            full(r.engine_value),
            full(r.ours),
            full(r.delta),
            full(r.floor),
            r.pass.map_or_else(String::new, |p| p.to_string()),
            serde_json::to_value(r.status).unwrap().as_str().unwrap().to_string(),
            r.discoveries.to_string(),
            r.hypotheses.to_string(),
            format!("{:.1}", r.runtime_secs),
            r.reason.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn comparison_markdown(rows: &[ComparisonRow], aggregates: &[AggregateRow], notes: &[String]) -> String {
    let mut out = String::from("# Benchmark comparison\n\n");
    out.push_str("| Dataset | Target | Metric | Published | Engine | Ours | Delta | Floor | Pass | Status |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let status = serde_json::to_value(r.status).unwrap().as_str().unwrap().to_string();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.dataset,
            r.target,
            r.metric,
            cell(r.published_value),
            cell(r.engine_value),
            cell(r.ours),
            cell(r.delta),
            cell(r.floor),
            r.pass.map_or("", |p| if p { "yes" } else { "no" }),
            status
        ));
    }
    out.push_str("\n## Mean per group\n\n| Group | Metric | Published mean | Engine mean | Our mean | Targets run |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for a in aggregates {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {}/{} |\n",
            a.group.label(),
            a.metric,
            cell(a.published_mean),
            cell(a.engine_mean),
            cell(a.ours_mean),
            a.targets_run,
            a.targets_total
        ));
    }
    let reasons: Vec<String> = rows
        .iter()
        .filter_map(|r| r.reason.as_ref().map(|m| format!("- {} / {}: {m}", r.dataset, r.target)))
        .collect();
    if !reasons.is_empty() || !notes.is_empty() {
        out.push_str("\n## Notes\n\n");
        for n in notes {
            out.push_str(&format!("- {n}\n"));
        }
        for r in reasons {
            out.push_str(&r);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_references_cover_every_target() {
        assert_eq!(group_references(Group::Ozone).len(), 15);
        assert_eq!(group_references(Group::ClimateBeliefs).len(), 4);
        assert_eq!(group_references(Group::Hcv), vec![("Score", 0.915, 0.977)]);
        assert_eq!(group_references(Group::Concrete), vec![("ccs", 3.26, 0.28)]);
    }

    #[test]
    fn floors_respect_direction() {
        assert!(meets_floor(MetricId::Accuracy, 0.91, 0.90));
        assert!(!meets_floor(MetricId::Rmse, 5.1, 5.0));
        assert!(meets_floor(MetricId::Rmse, 4.9, 5.0));
    }

    #[test]
    fn aggregate_single_target_is_that_value() {
        let cfg = BenchmarkConfig::from_toml_str(
            "id = \"x\"\ngroup = \"hcv\"\navailability = \"user_supplied\"\n[run.data]\npath = \"/nonexistent/x.csv\"\ntarget = \"Score\"\n",
            Path::new("."),
        )
        .unwrap();
        let rows: Vec<ComparisonRow> = run_benchmark(&cfg, None, "t").into_iter().map(|r| r.row).collect();
        assert_eq!(rows[0].status, RowStatus::Skipped);
        let a = aggregate_group(Group::Hcv, &rows).unwrap();
        assert_eq!(a.published_mean, Some(0.915));
        assert_eq!(a.ours_mean, None);
        assert!(matches!(aggregate_group(Group::Ozone, &rows), Err(BenchError::EmptyGroup(_))));
    }
}
