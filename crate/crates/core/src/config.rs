//! Run configuration, read from TOML. Unknown keys are rejected everywhere.
//!
//! ```
//! use discover::config::RunConfig;
//! let cfg = RunConfig::from_toml_str(r#"
//!     seed = 7
//!     [data]
//!     path = "planted.csv"
//!     target = "y"
//! "#).unwrap();
//! assert_eq!(cfg.seed, 7);
//! assert_eq!(cfg.mining.beam_width, 20);
//! assert!(RunConfig::from_toml_str("sed = 7").is_err());
//! ```

use crate::automl::SearchBudget;
use crate::metrics::MetricId;
use crate::models::{ModelFamily, Task};
use crate::patterns::MiningConfig;
use crate::preprocess::PreprocessOptions;
use crate::table::{ColumnKind, CsvOptions, SplitSpec, DEFAULT_MISSING_TOKENS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable naming the root directory for relative data paths.
pub const DATA_DIR_ENV: &str = "DISCOVER_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskChoice {
    #[default]
    Auto,
    Regression,
    BinaryClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub target: String,
    #[serde(default)]
    pub task: TaskChoice,
    /// Columns excluded from modelling and mining.
    #[serde(default)]
    pub ignore: Vec<String>,
    #[serde(default)]
    pub kind_hints: BTreeMap<String, ColumnKind>,
    #[serde(default)]
    pub missing_tokens: Option<Vec<String>>,
    /// Target levels mapped to the positive class of a binary target.
    #[serde(default)]
    pub positive_levels: Vec<String>,
    /// Target levels whose rows are removed before anything else.
    #[serde(default)]
    pub drop_levels: Vec<String>,
    /// Column holding a predefined split (`train` / `test`); ignored as a
    /// feature when set.
    #[serde(default)]
    pub split_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub holdout_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            holdout_fraction: 0.2,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub dedup: bool,
    pub outliers: bool,
    pub outlier_z: f64,
    pub outlier_max_column_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let d = PreprocessOptions::default();
        PreprocessConfig {
            dedup: d.dedup,
            outliers: d.outlier_z.is_some(),
            outlier_z: d.outlier_z.unwrap_or(4.0),
            outlier_max_column_fraction: d.outlier_max_column_fraction,
        }
    }
}

impl PreprocessConfig {
    pub fn options(&self) -> PreprocessOptions {
        PreprocessOptions {
            dedup: self.dedup,
            outlier_z: self.outliers.then_some(self.outlier_z),
            outlier_max_column_fraction: self.outlier_max_column_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Defaults to accuracy for classification and R² for regression.
    pub primary_metric: Option<MetricId>,
    pub max_candidates: usize,
    pub families: Vec<ModelFamily>,
    pub time_limit_secs: Option<f64>,
    pub validation_fraction: f64,
    pub overfit_gap: f64,
    pub overfit_relative: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let b = SearchBudget::default();
        SearchConfig {
            primary_metric: None,
            max_candidates: b.max_candidates,
            families: b.families,
            time_limit_secs: b.time_limit_secs,
            validation_fraction: b.validation_fraction,
            overfit_gap: b.overfit_gap,
            overfit_relative: b.overfit_relative,
        }
    }
}

impl SearchConfig {
    pub fn budget(&self, seed: u64) -> SearchBudget {
        SearchBudget {
            max_candidates: self.max_candidates,
            families: self.families.clone(),
            time_limit_secs: self.time_limit_secs,
            validation_fraction: self.validation_fraction,
            overfit_gap: self.overfit_gap,
            overfit_relative: self.overfit_relative,
            seed,
        }
    }

    pub fn metric_for(&self, task: Task) -> MetricId {
        self.primary_metric.unwrap_or(match task {
            Task::Regression => MetricId::R2,
            Task::BinaryClassification => MetricId::Accuracy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub mining: MiningConfig,
    /// Parent directory for run directories; not part of the config hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.data.target.is_empty() {
            return bad("data.target is empty".into());
        }
        if !(self.split.holdout_fraction > 0.0 && self.split.holdout_fraction < 1.0) {
            return bad("split.holdout_fraction must lie in (0, 1)".into());
        }
        if !(self.preprocess.outlier_z > 0.0) {
            return bad("preprocess.outlier_z must be positive".into());
        }
        if self.search.max_candidates == 0 || self.search.families.is_empty() {
            return bad("search needs at least one candidate and one family".into());
        }
        if !(self.search.validation_fraction > 0.0 && self.search.validation_fraction < 1.0) {
            return bad("search.validation_fraction must lie in (0, 1)".into());
        }
        if let (Some(metric), TaskChoice::Regression | TaskChoice::BinaryClassification) =
            (self.search.primary_metric, self.data.task)
        {
            let task = if self.data.task == TaskChoice::Regression {
                Task::Regression
            } else {
                Task::BinaryClassification
            };
            if metric.check_task(task).is_err() {
                return bad(format!("metric `{metric}` does not fit task {:?}", self.data.task));
            }
        }
        let overlap = self.data.positive_levels.iter().find(|l| self.data.drop_levels.contains(l));
        if let Some(l) = overlap {
            return bad(format!("level `{l}` is both positive and dropped"));
        }
        self.mining.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            kind_hints: self.data.kind_hints.clone(),
            missing_tokens: self
                .data
                .missing_tokens
                .clone()
                .unwrap_or_else(|| DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            holdout_fraction: self.split.holdout_fraction,
            stratified: self.split.stratified,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form, with `output_dir` cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Where the data file lives: absolute paths as given; relative paths
    /// under `$DISCOVER_DATA_DIR` when that file exists, else relative to
    /// `base` (normally the config file's directory).
    pub fn resolve_data_path(&self, base: &Path) -> PathBuf {
        resolve_path(&self.data.path, base)
    }
}

pub fn resolve_path(path: &Path, base: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    if let Some(root) = std::env::var_os(DATA_DIR_ENV) {
        let candidate = Path::new(&root).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    base.join(path)
}
