//! Column-major typed tables with per-column missing masks.
//!
//! A [`Table`] is built once (usually by [`read_csv`]) and never mutated
//! afterwards; every transformation produces a new table. Numeric columns
//! hold `f64` values, categorical and binary columns hold small integer codes
//! into a level dictionary.

mod csv_io;
mod split;

pub use csv_io::{read_csv, read_csv_from_reader, write_csv, CsvOptions, DEFAULT_MISSING_TOKENS};
pub use split::{split, SplitSpec};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("csv has a header but no data rows")]
    NoRows,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has length {found}, expected {expected}")]
    LengthMismatch { column: String, expected: usize, found: usize },
    #[error("column `{column}`: code {code} out of range for {levels} levels")]
    CodeOutOfRange { column: String, code: u32, levels: usize },
    #[error("table declares {0} target columns, expected exactly one")]
    TargetCount(usize),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("column `{column}` is {found:?}, expected {expected}")]
    KindMismatch {
        column: String,
        found: ColumnKind,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Target,
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

/// Storage for one column. Binary columns use the `Categorical` layout with
/// exactly two levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub schema: ColumnSchema,
    pub data: ColumnData,
    pub missing: Vec<bool>,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Column {
            schema: ColumnSchema {
                name: name.into(),
                kind: ColumnKind::Numeric,
                role: ColumnRole::Feature,
            },
            data: ColumnData::Numeric(values),
            missing,
        }
    }

    /// Categorical column from optional string cells; levels are sorted.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, cells: &[Option<S>]) -> Self {
        let mut levels: Vec<String> = cells
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect();
        levels.sort();
        levels.dedup();
        let index: BTreeMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = cells
            .iter()
            .map(|c| c.as_ref().map_or(0, |s| index[s.as_ref()]))
            .collect();
        let missing = cells.iter().map(|c| c.is_none()).collect();
        let kind = ColumnKind::Categorical;
        Column {
            schema: ColumnSchema {
                name: name.into(),
                kind,
                role: ColumnRole::Feature,
            },
            data: ColumnData::Categorical {
                codes,
                levels: levels.clone(),
            },
            missing,
        }
    }

    pub fn with_kind(mut self, kind: ColumnKind) -> Self {
        self.schema.kind = kind;
        self
    }

    pub fn with_role(mut self, role: ColumnRole) -> Self {
        self.schema.role = role;
        self
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.schema.kind
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    pub fn as_codes(&self) -> Option<(&[u32], &[String])> {
        match &self.data {
            ColumnData::Categorical { codes, levels } => Some((codes, levels)),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Value at `row` as a real: the number for numeric columns, the code for
    /// coded columns, `None` when missing.
    pub fn value_f64(&self, row: usize) -> Option<f64> {
        if self.missing[row] {
            return None;
        }
        Some(match &self.data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row] as f64,
        })
    }

    /// Cell rendered as text, `None` when missing.
    pub fn cell_text(&self, row: usize) -> Option<String> {
        if self.missing[row] {
            return None;
        }
        Some(match &self.data {
            ColumnData::Numeric(v) => format_real(v[row]),
            ColumnData::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
        })
    }

    /// Non-missing values of a numeric column.
    pub fn present_values(&self) -> Vec<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v
                .iter()
                .zip(&self.missing)
                .filter(|(_, m)| !**m)
                .map(|(x, _)| *x)
                .collect(),
            ColumnData::Categorical { .. } => Vec::new(),
        }
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
        };
        Column {
            schema: self.schema.clone(),
            data,
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
        }
    }
}

/// Shortest round-trippable decimal rendering of a real.
pub fn format_real(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    /// Builds a table, checking lengths, code ranges, unique names and that at
    /// most one column is the target.
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        let row_count = columns.first().map_or(0, |c| c.len());
        let mut seen = std::collections::BTreeSet::new();
        let mut targets = 0;
        for col in &columns {
            if !seen.insert(col.name().to_string()) {
                return Err(TableError::DuplicateColumn(col.name().to_string()));
            }
            if col.schema.role == ColumnRole::Target {
                targets += 1;
            }
            let len = match &col.data {
                ColumnData::Numeric(v) => v.len(),
                ColumnData::Categorical { codes, levels } => {
                    for (code, miss) in codes.iter().zip(&col.missing) {
                        if !miss && *code as usize >= levels.len() {
                            return Err(TableError::CodeOutOfRange {
                                column: col.name().to_string(),
                                code: *code,
                                levels: levels.len(),
                            });
                        }
                    }
                    codes.len()
                }
            };
            for found in [len, col.missing.len()] {
                if found != row_count {
                    return Err(TableError::LengthMismatch {
                        column: col.name().to_string(),
                        expected: row_count,
                        found,
                    });
                }
            }
        }
        if targets > 1 {
            return Err(TableError::TargetCount(targets));
        }
        Ok(Table { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schemas(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(|c| c.schema.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column, TableError> {
        self.column(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn target(&self) -> Option<&Column> {
        self.columns
            .iter()
            .find(|c| c.schema.role == ColumnRole::Target)
    }

    pub fn require_target(&self) -> Result<&Column, TableError> {
        self.target().ok_or(TableError::TargetCount(0))
    }

    pub fn features(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .filter(|c| c.schema.role == ColumnRole::Feature)
    }

    /// Marks `name` as the target; any previous target becomes a feature.
    pub fn with_target(mut self, name: &str) -> Result<Self, TableError> {
        if self.column(name).is_none() {
            return Err(TableError::UnknownColumn(name.to_string()));
        }
        for col in &mut self.columns {
            if col.name() == name {
                col.schema.role = ColumnRole::Target;
            } else if col.schema.role == ColumnRole::Target {
                col.schema.role = ColumnRole::Feature;
            }
        }
        Ok(self)
    }

    pub fn with_role(mut self, name: &str, role: ColumnRole) -> Result<Self, TableError> {
        let col = self
            .columns
            .iter_mut()
            .find(|c| c.name() == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
        col.schema.role = role;
        Ok(self)
    }

    /// Replaces (or appends) a column of the same length.
    pub fn with_column(mut self, column: Column) -> Result<Self, TableError> {
        match self.column_index(column.name()) {
            Some(i) => self.columns[i] = column,
            None => self.columns.push(column),
        }
        Table::new(self.columns)
    }

    /// New table holding the given rows in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            row_count: rows.len(),
        }
    }

    /// Rows whose target cell is present.
    pub fn rows_with_target(&self) -> Vec<usize> {
        match self.target() {
            Some(t) => (0..self.row_count).filter(|&r| !t.missing[r]).collect(),
            None => (0..self.row_count).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_columns() {
        let err = Table::new(vec![
            Column::numeric("a", vec![1.0, 2.0]),
            Column::numeric("b", vec![1.0]),
        ])
        .unwrap_err();
        assert!(matches!(err, TableError::LengthMismatch { .. }));
    }

    #[test]
    fn rejects_two_targets() {
        let err = Table::new(vec![
            Column::numeric("a", vec![1.0]).with_role(ColumnRole::Target),
            Column::numeric("b", vec![1.0]).with_role(ColumnRole::Target),
        ])
        .unwrap_err();
        assert!(matches!(err, TableError::TargetCount(2)));
    }

    #[test]
    fn rejects_duplicate_names() {
        let err = Table::new(vec![
            Column::numeric("a", vec![1.0]),
            Column::numeric("a", vec![2.0]),
        ])
        .unwrap_err();
        assert!(matches!(err, TableError::DuplicateColumn(_)));
    }

    #[test]
    fn categorical_levels_sorted_and_coded() {
        let col = Column::categorical("c", &[Some("y"), None, Some("x"), Some("y")]);
        let (codes, levels) = col.as_codes().unwrap();
        assert_eq!(levels, ["x", "y"]);
        assert_eq!(codes[0], 1);
        assert_eq!(codes[2], 0);
        assert!(col.is_missing(1));
    }

    #[test]
    fn with_target_moves_role() {
        let t = Table::new(vec![
            Column::numeric("a", vec![1.0]),
            Column::numeric("b", vec![2.0]),
        ])
        .unwrap()
        .with_target("a")
        .unwrap()
        .with_target("b")
        .unwrap();
        assert_eq!(t.target().unwrap().name(), "b");
        assert_eq!(t.features().count(), 1);
    }
}
