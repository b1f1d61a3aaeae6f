//! Run report: `report.json` is the source of truth, `report.md` a pure
//! projection of it. The timestamp lives only in `metadata.timestamp`.

use crate::automl::Leaderboard;
use crate::config::RunConfig;
use crate::metrics::MetricSet;
use crate::models::{ModelSpec, Task, TrainedModel};
use crate::patterns::{
    bind_conditions, Condition, Effect, EffectFamily, Evaluator, FeatureScore, MinedPattern, MiningResult,
    PatternEvidence, PatternKind,
};
use crate::pipeline::{LoadedData, PipelineError};
use crate::preprocess::PreprocessPlan;
use crate::table::Table;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    /// Data path as written in the config.
    pub path: String,
    pub rows: usize,
    pub target: String,
    pub task: Task,
    pub positive_levels: Vec<String>,
    /// CSV data-row indices (0-based, header excluded) of each partition.
    pub train_rows: Vec<usize>,
    pub holdout_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPattern {
    pub rank: usize,
    pub kind: PatternKind,
    pub description: String,
    pub effect: Effect,
    pub conditions: Vec<Condition>,
    pub train: PatternEvidence,
    pub holdout: PatternEvidence,
    pub adjusted_p: f64,
    pub model_effect: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    BarProportion,
    Violin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureGroup {
    pub label: String,
    pub n: usize,
    pub mu: Option<f64>,
    /// Test of the group against its complement; `None` for the overall
    /// group.
    pub p: Option<f64>,
    /// Raw target values of the group, for violin figures.
    pub values: Option<Vec<f64>>,
}

/// Plot data for one pattern over all rows: the overall distribution, each
/// condition alone, then the full conjunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePayload {
    pub pattern_rank: usize,
    pub kind: FigureKind,
    pub groups: Vec<FigureGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningSummary {
    pub features_searched: Vec<String>,
    pub candidates_evaluated: usize,
    pub patterns_emitted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metadata: RunMetadata,
    pub config: RunConfig,
    pub data: DataSummary,
    pub plan: PreprocessPlan,
    pub leaderboard: Leaderboard,
    pub best_model: ModelSpec,
    pub holdout_metrics: MetricSet,
    pub feature_importance: Vec<FeatureScore>,
    pub mining: MiningSummary,
    pub discoveries: Vec<ReportPattern>,
    pub hypotheses: Vec<ReportPattern>,
    pub figure_data: Vec<FigurePayload>,
    pub warnings: Vec<String>,
}

pub struct ReportInputs<'a> {
    pub config: &'a RunConfig,
    pub timestamp: &'a str,
    pub data: &'a LoadedData,
    pub train_rows: &'a [usize],
    pub holdout_rows: &'a [usize],
    pub plan: &'a PreprocessPlan,
    pub leaderboard: Leaderboard,
    pub model: &'a TrainedModel,
    pub holdout_metrics: MetricSet,
    pub importance: Vec<FeatureScore>,
    pub mining: MiningResult,
    pub warnings: Vec<String>,
}

fn report_pattern(m: &MinedPattern) -> ReportPattern {
    ReportPattern {
        rank: m.holdout.novelty_rank,
        kind: m.pattern.kind,
        description: m.pattern.key(),
        effect: m.pattern.effect,
        conditions: m.pattern.conditions.clone(),
        train: m.train.clone(),
        holdout: m.holdout.clone(),
        adjusted_p: m.adjusted_p,
        model_effect: m.model_effect,
    }
}

/// Figure groups for a pattern over every row of `table`.
pub fn figure_payload(table: &Table, pattern: &ReportPattern) -> Result<FigurePayload, crate::patterns::PatternError> {
    let eval = Evaluator::new(table)?;
    let kind = if eval.is_binary() {
        FigureKind::BarProportion
    } else {
        FigureKind::Violin
    };
    let group = |label: String, mask: &crate::patterns::Mask, test: bool| -> Result<FigureGroup, crate::patterns::PatternError> {
        let ev = eval.evaluate(mask, pattern.effect)?;
        Ok(FigureGroup {
            label,
            n: ev.n,
            mu: ev.mu,
            p: if test && !ev.degenerate { Some(ev.p) } else { None },
            values: (kind == FigureKind::Violin).then(|| eval.values(mask)),
        })
    };
    let mut groups = vec![group("overall".to_string(), &crate::patterns::Mask::full(table.row_count()), false)?];
    for c in &pattern.conditions {
        groups.push(group(c.to_string(), &c.bind(table)?, true)?);
    }
    if pattern.conditions.len() > 1 {
        groups.push(group(pattern.description.clone(), &bind_conditions(table, &pattern.conditions)?, true)?);
    }
    Ok(FigurePayload {
        pattern_rank: pattern.rank,
        kind,
        groups,
    })
}

pub fn build_report(inputs: ReportInputs) -> Result<RunReport, PipelineError> {
    let ReportInputs {
        config,
        timestamp,
        data,
        train_rows,
        holdout_rows,
        plan,
        leaderboard,
        model,
        holdout_metrics,
        importance,
        mining,
        warnings,
    } = inputs;
    let source = |rows: &[usize]| rows.iter().map(|&r| data.source_rows[r]).collect::<Vec<_>>();
    let ranked: Vec<ReportPattern> = mining.patterns.iter().map(report_pattern).collect();
    let mut figure_data = Vec::with_capacity(ranked.len());
    for p in &ranked {
        figure_data.push(figure_payload(&data.table, p)?);
    }
    let (discoveries, hypotheses): (Vec<_>, Vec<_>) =
        ranked.into_iter().partition(|p| p.kind == PatternKind::Discovery);
    let mut warnings = warnings;
    warnings.extend(plan.warnings.iter().cloned());
    Ok(RunReport {
        metadata: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            timestamp: timestamp.to_string(),
        },
        config: config.clone(),
        data: DataSummary {
            path: config.data.path.display().to_string(),
            rows: data.table.row_count(),
            target: config.data.target.clone(),
            task: data.task,
            positive_levels: data.positive_levels.clone(),
            train_rows: source(train_rows),
            holdout_rows: source(holdout_rows),
        },
        plan: plan.clone(),
        best_model: model.spec.clone(),
        leaderboard,
        holdout_metrics,
        feature_importance: importance,
        mining: MiningSummary {
            features_searched: mining.features_searched,
            candidates_evaluated: mining.candidates_evaluated,
            patterns_emitted: mining.patterns_emitted,
        },
        discoveries,
        hypotheses,
        figure_data,
        warnings,
    })
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<RunReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Patterns of both kinds in rank order.
    pub fn patterns(&self) -> Vec<&ReportPattern> {
        let mut all: Vec<&ReportPattern> = self.discoveries.iter().chain(&self.hypotheses).collect();
        all.sort_by_key(|p| p.rank);
        all
    }
}

/// A real exactly as it appears in the JSON.
fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), num)
}

fn evidence_line(label: &str, e: &PatternEvidence) -> String {
    format!("- {label}: n = {}, μ = {}, p = {}", e.n, opt(e.mu), num(e.p))
}

fn effect_text(effect: Effect) -> String {
    let (what, dir) = match effect.family() {
        EffectFamily::Mean => ("mean", effect.direction()),
        EffectFamily::Odds => ("odds of the positive class", effect.direction()),
        EffectFamily::Variance => ("spread", effect.direction()),
    };
    let dir = match dir {
        crate::stats::Direction::Greater => "higher",
        crate::stats::Direction::Less => "lower",
    };
    format!("{dir} {what} than the remaining rows (`{effect}`)")
}

fn pattern_section(out: &mut String, p: &ReportPattern) {
    let _ = writeln!(out, "### {}. {}\n", p.rank, p.description);
    let _ = writeln!(out, "Target shows {}.\n", effect_text(p.effect));
    let _ = writeln!(out, "{}", evidence_line("Holdout", &p.holdout));
    let _ = writeln!(out, "{}", evidence_line("Train", &p.train));
    let _ = writeln!(out, "- Adjusted holdout p = {}", num(p.adjusted_p));
    if let Some(m) = p.model_effect {
        let _ = writeln!(out, "- Model-predicted effect = {}", num(m));
    }
    out.push('\n');
}

/// Markdown rendering of a report; deterministic for a given report.
pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    let m = &report.metadata;
    let _ = writeln!(out, "# Discovery report\n");
    let _ = writeln!(out, "- Config hash: `{}`", m.config_hash);
    let _ = writeln!(out, "- Seed: {}", m.seed);
    let _ = writeln!(out, "- Timestamp: {}", m.timestamp);
    let _ = writeln!(
        out,
        "- Data: `{}` ({} rows, target `{}`, {})\n",
        report.data.path,
        report.data.rows,
        report.data.target,
        match report.data.task {
            Task::Regression => "regression",
            Task::BinaryClassification => "binary classification",
        }
    );

    let lb = &report.leaderboard;
    let metric = lb.primary_metric;
    let _ = writeln!(out, "## Models\n");
    let _ = writeln!(out, "| Rank | Family | Validation {metric} | Train {metric} | Overfit gap | Flagged |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for (i, e) in lb.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {}{} | {} | {} | {} | {} | {} |",
            i + 1,
            if i == lb.best_index { " (selected)" } else { "" },
            e.spec.family(),
            opt(e.score),
            opt(e.train_score),
            opt(e.overfit_gap),
            if e.overfit { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out, "\nHoldout metrics of the selected model:\n");
    let _ = writeln!(out, "| Metric | Value |");
    let _ = writeln!(out, "|---|---|");
    for (id, v) in &report.holdout_metrics.values {
        let _ = writeln!(out, "| {id} | {} |", opt(*v));
    }
    out.push('\n');

    if !report.feature_importance.is_empty() {
        let _ = writeln!(out, "## Feature importance\n");
        let _ = writeln!(out, "| Feature | Importance |");
        let _ = writeln!(out, "|---|---|");
        for f in &report.feature_importance {
            let _ = writeln!(out, "| {} | {} |", f.feature, num(f.importance));
        }
        out.push('\n');
    }

    if report.discoveries.is_empty() && report.hypotheses.is_empty() {
        let _ = writeln!(out, "## Patterns\n");
        let _ = writeln!(out, "No patterns were found: nothing passed validation on the holdout or on the training data.");
    } else {
        for (title, list) in [("Discoveries", &report.discoveries), ("Hypotheses", &report.hypotheses)] {
            let _ = writeln!(out, "## {title}\n");
            if list.is_empty() {
                let _ = writeln!(out, "None.\n");
            }
            for p in list.iter() {
                pattern_section(&mut out, p);
            }
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "## Warnings\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

/// Run directory name for a config hash.
pub fn run_dir_name(config_hash: &str) -> String {
    config_hash.chars().take(16).collect()
}

/// Writes report, model and plan into `<parent>/<hash prefix>`, building it
/// in a temporary sibling first so a failed write leaves nothing behind.
pub fn write_run_dir(
    parent: &Path,
    report: &RunReport,
    model: &TrainedModel,
    plan: &PreprocessPlan,
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(parent)?;
    let name = run_dir_name(&report.metadata.config_hash);
    let final_dir = parent.join(&name);
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    let write = || -> std::io::Result<()> {
        std::fs::create_dir(&tmp)?;
        std::fs::write(tmp.join(REPORT_JSON), report.to_json())?;
        std::fs::write(tmp.join(REPORT_MD), render_markdown(report))?;
        std::fs::write(tmp.join("model.json"), serde_json::to_string(model)?)?;
        std::fs::write(tmp.join("plan.json"), serde_json::to_string_pretty(plan)?)?;
        std::fs::write(tmp.join("leaderboard.json"), serde_json::to_string_pretty(&report.leaderboard)?)?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if final_dir.exists() {
        std::fs::remove_dir_all(&final_dir)?;
    }
    std::fs::rename(&tmp, &final_dir)?;
    Ok(final_dir)
}

/// Replaces the timestamp value so two report texts can be compared.
pub fn mask_timestamp(json: &str) -> String {
    let mut value: serde_json::Value = match serde_json::from_str(json) {
        Ok(v) => v,
        Err(_) => return json.to_string(),
    };
    if let Some(ts) = value.pointer_mut("/metadata/timestamp") {
        *ts = serde_json::Value::String("<masked>".into());
    }
    serde_json::to_string_pretty(&value).expect("value serializes")
}
