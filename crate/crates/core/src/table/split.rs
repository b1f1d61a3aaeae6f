use super::{ColumnData, Table, TableError};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub holdout_fraction: f64,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            holdout_fraction: 0.2,
            stratified: true,
            seed: 0,
        }
    }
}

const MIN_ROWS: usize = 5;

impl SplitSpec {
    /// Row indices `(train, holdout)`, each ascending.
    ///
    /// Stratification applies when the target is coded (binary or
    /// categorical): every class is shuffled on its own and contributes
    /// `round(size * fraction)` rows to the holdout, clamped so that classes
    /// with two or more members land in both partitions.
    pub fn indices(&self, table: &Table) -> Result<(Vec<usize>, Vec<usize>), TableError> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(TableError::Split(format!(
                "holdout_fraction {} outside (0, 1)",
                self.holdout_fraction
            )));
        }
        let n = table.row_count();
        if n < MIN_ROWS {
            return Err(TableError::Split(format!("{n} rows, need at least {MIN_ROWS}")));
        }
        let strata = self.strata(table);
        let stratified = self.stratified;
        let mut rng = rng::rng(self.seed);
        let mut train = Vec::with_capacity(n);
        let mut holdout = Vec::new();
        for mut rows in strata.into_values() {
            let size = rows.len();
            let mut take = (size as f64 * self.holdout_fraction).round() as usize;
            if stratified && size >= 2 {
                take = take.clamp(1, size - 1);
            }
            rng::shuffle(&mut rows, &mut rng);
            holdout.extend_from_slice(&rows[..take]);
            train.extend_from_slice(&rows[take..]);
        }
        if holdout.is_empty() || train.is_empty() {
            return Err(TableError::Split(format!(
                "holdout_fraction {} leaves an empty partition over {n} rows",
                self.holdout_fraction
            )));
        }
        train.sort_unstable();
        holdout.sort_unstable();
        Ok((train, holdout))
    }

    fn strata(&self, table: &Table) -> BTreeMap<Option<u32>, Vec<usize>> {
        let mut strata: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
        let codes = match table.target() {
            Some(t) if self.stratified => match &t.data {
                ColumnData::Categorical { codes, .. } => Some((codes, &t.missing)),
                ColumnData::Numeric(_) => None,
            },
            _ => None,
        };
        for row in 0..table.row_count() {
            let key = codes.and_then(|(c, m)| (!m[row]).then(|| c[row]));
            strata.entry(key).or_default().push(row);
        }
        strata
    }
}

/// Splits `table` into `(train, holdout)` according to `spec`.
pub fn split(table: &Table, spec: &SplitSpec) -> Result<(Table, Table), TableError> {
    let (train, holdout) = spec.indices(table)?;
    Ok((table.take_rows(&train), table.take_rows(&holdout)))
}
