//! End-to-end run: load, split, preprocess, search, mine, report.

use crate::automl::{self, AutomlError, SearchOutcome};
use crate::config::{ConfigError, RunConfig, TaskChoice};
use crate::metrics::{self, MetricSet};
use crate::models::{self, ModelError, Task};
use crate::patterns::{self, PatternError};
use crate::preprocess::{apply_plan, fit_plan, PreprocessError};
use crate::report::{build_report, RunReport};
use crate::table::{read_csv, Column, ColumnData, ColumnKind, ColumnRole, Table, TableError};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("pipeline error: {0}")]
    Failed(String),
}

impl From<TableError> for PipelineError {
    fn from(e: TableError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<PreprocessError> for PipelineError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::NoUsableFeatures | PreprocessError::EmptyTraining | PreprocessError::NoTarget => {
                PipelineError::Data(e.to_string())
            }
            other => PipelineError::Failed(other.to_string()),
        }
    }
}

impl From<ModelError> for PipelineError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DegenerateTarget(_) | ModelError::Empty => PipelineError::Data(e.to_string()),
            other => PipelineError::Failed(other.to_string()),
        }
    }
}

impl From<AutomlError> for PipelineError {
    fn from(e: AutomlError) -> Self {
        match e {
            AutomlError::Model(m) => m.into(),
            other => PipelineError::Failed(other.to_string()),
        }
    }
}

impl From<PatternError> for PipelineError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::Model(m) => m.into(),
            PatternError::Preprocess(p) => p.into(),
            other => PipelineError::Failed(other.to_string()),
        }
    }
}

/// The input table after target preparation.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub path: PathBuf,
    /// Target set; ignored and split columns marked `Ignored`.
    pub table: Table,
    /// CSV data-row index (0-based, header excluded) of each table row.
    pub source_rows: Vec<usize>,
    pub task: Task,
    /// Levels forming the positive class when the target was binarised.
    pub positive_levels: Vec<String>,
    /// Rows assigned to the holdout by the split column, if any.
    pub predefined_holdout: Option<Vec<usize>>,
}

/// Binarises a categorical target: configured positive levels become "1",
/// every other present level "0".
fn binarise(column: &Column, positive: &[String]) -> Result<Column, PipelineError> {
    let (codes, levels) = column
        .as_codes()
        .ok_or_else(|| PipelineError::Data(format!("target `{}` is numeric; positive_levels do not apply", column.name())))?;
    for p in positive {
        if !levels.contains(p) {
            return Err(PipelineError::Data(format!("positive level `{p}` does not occur in `{}`", column.name())));
        }
    }
    let cells: Vec<Option<&str>> = codes
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            (!column.is_missing(r)).then(|| if positive.contains(&levels[c as usize]) { "1" } else { "0" })
        })
        .collect();
    let mut out = Column::categorical(column.name(), &cells).with_kind(ColumnKind::Binary);
    if let ColumnData::Categorical { levels, codes } = &mut out.data {
        // keep "0" and "1" as codes 0 and 1 even if one class is absent
        if levels.len() == 1 && levels[0] == "1" {
            codes.iter_mut().for_each(|c| *c = 1);
            *levels = vec!["0".into(), "1".into()];
        } else if levels.len() == 1 {
            levels.push("1".into());
        }
    }
    out.schema.role = ColumnRole::Target;
    Ok(out)
}

/// Reads and prepares the data named by `config`, resolving its path
/// against `base`.
pub fn load_data(config: &RunConfig, base: &Path) -> Result<LoadedData, PipelineError> {
    let path = config.resolve_data_path(base);
    if !path.is_file() {
        return Err(PipelineError::Data(format!("data file not found: {}", path.display())));
    }
    let raw = read_csv(&path, &config.csv_options())?;
    prepare_data(config, &raw, path)
}

/// Target preparation on an already parsed table, so several targets can
/// share one read of the CSV.
pub fn prepare_data(config: &RunConfig, raw: &Table, path: PathBuf) -> Result<LoadedData, PipelineError> {
    let target_name = &config.data.target;
    let target = raw
        .column(target_name)
        .ok_or_else(|| PipelineError::Data(format!("target column `{target_name}` not found")))?
        .clone();

    let mut keep: Vec<usize> = (0..raw.row_count()).collect();
    if !config.data.drop_levels.is_empty() {
        let levels: Vec<String> = (0..raw.row_count()).map(|r| target.cell_text(r).unwrap_or_default()).collect();
        keep.retain(|&r| target.is_missing(r) || !config.data.drop_levels.contains(&levels[r]));
    }
    let mut table = raw.take_rows(&keep);
    let target = table.column(target_name).unwrap().clone();

    let positive_levels = config.data.positive_levels.clone();
    if !positive_levels.is_empty() {
        table = table.with_column(binarise(&target, &positive_levels)?)?;
    }
    table = table.with_target(target_name)?;
    for name in &config.data.ignore {
        table = table.with_role(name, ColumnRole::Ignored)?;
    }

    let kind = table.target().unwrap().kind();
    let task = match (config.data.task, kind) {
        (TaskChoice::Regression, ColumnKind::Numeric) | (TaskChoice::Auto, ColumnKind::Numeric) => Task::Regression,
        (TaskChoice::BinaryClassification, ColumnKind::Binary) | (TaskChoice::Auto, ColumnKind::Binary) => {
            Task::BinaryClassification
        }
        (_, ColumnKind::Categorical) => {
            return Err(PipelineError::Data(format!(
                "target `{target_name}` is categorical; set data.positive_levels to binarise it"
            )))
        }
        (choice, found) => {
            return Err(PipelineError::Data(format!("task {choice:?} does not fit a {found:?} target")));
        }
    };

    let predefined_holdout = match &config.data.split_column {
        None => None,
        Some(name) => {
            let col = table
                .column(name)
                .ok_or_else(|| PipelineError::Data(format!("split column `{name}` not found")))?
                .clone();
            table = table.with_role(name, ColumnRole::Ignored)?;
            Some(
                (0..table.row_count())
                    .filter(|&r| col.cell_text(r).is_some_and(|s| s.eq_ignore_ascii_case("test")))
                    .collect(),
            )
        }
    };

    Ok(LoadedData {
        path,
        table,
        source_rows: keep,
        task,
        positive_levels,
        predefined_holdout,
    })
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub model: models::TrainedModel,
    pub plan: crate::preprocess::PreprocessPlan,
}

/// Train/holdout row indices into `data.table`.
pub fn partition(config: &RunConfig, data: &LoadedData) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    match &data.predefined_holdout {
        Some(holdout) => {
            if holdout.is_empty() || holdout.len() == data.table.row_count() {
                return Err(PipelineError::Data("split column leaves one partition empty".into()));
            }
            let train = (0..data.table.row_count()).filter(|r| holdout.binary_search(r).is_err()).collect();
            Ok((train, holdout.clone()))
        }
        None => Ok(config.split_spec().indices(&data.table)?),
    }
}

/// Runs the whole pipeline. `base` resolves relative data paths; the
/// timestamp is recorded verbatim.
pub fn run(config: &RunConfig, base: &Path, timestamp: &str) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    let data = load_data(config, base)?;
    run_loaded(config, &data, timestamp)
}

pub fn run_loaded(config: &RunConfig, data: &LoadedData, timestamp: &str) -> Result<RunArtifacts, PipelineError> {
    let (train_rows, holdout_rows) = partition(config, data)?;
    let train_raw = data.table.take_rows(&train_rows);
    let holdout_raw = data.table.take_rows(&holdout_rows);

    let plan = fit_plan(&train_raw, &config.preprocess.options())?;
    let train_enc = apply_plan(&plan, &train_raw, true)?;
    let holdout_enc = apply_plan(&plan, &holdout_raw, false)?;

    let metric = config.search.metric_for(data.task);
    let SearchOutcome {
        leaderboard,
        model,
        warnings,
    } = automl::search(&train_enc, data.task, metric, &config.search.budget(config.seed))?;

    let holdout_metrics: MetricSet = {
        let d = crate::matrix::Dataset::from_encoded(&holdout_enc).map_err(PipelineError::Failed)?;
        let preds = model.predict_dataset(&d)?;
        metrics::evaluate(data.task, &d.y, &preds).map_err(|e| PipelineError::Failed(e.to_string()))?
    };

    let (mining, importance) =
        patterns::mine_patterns(&model, &plan, &train_raw, &holdout_raw, &config.mining, config.seed)?;

    let report = build_report(crate::report::ReportInputs {
        config,
        timestamp,
        data,
        train_rows: &train_rows,
        holdout_rows: &holdout_rows,
        plan: &plan,
        leaderboard,
        model: &model,
        holdout_metrics,
        importance,
        mining,
        warnings,
    })?;
    Ok(RunArtifacts { report, model, plan })
}
