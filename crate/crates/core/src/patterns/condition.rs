use super::mask::Mask;
use super::PatternError;
use crate::table::{format_real, ColumnData, Table};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// Linear-interpolation empirical quantile (Hyndman-Fan type 7) of sorted
/// values.
///
/// ```
/// use discover::patterns::quantile_sorted;
/// let v: Vec<f64> = (1..=10).map(f64::from).collect();
/// assert!((quantile_sorted(&v, 0.8) - 8.2).abs() < 1e-12);
/// ```
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ConditionForm {
    /// Value strictly above the training `q`-quantile `threshold`.
    QuantileAbove { q: f64, threshold: f64 },
    /// Value strictly below the training `q`-quantile `threshold`.
    QuantileBelow { q: f64, threshold: f64 },
    /// Value in the closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    CategoryEquals { level: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    #[serde(flatten)]
    pub form: ConditionForm,
}

impl Condition {
    /// `feature > quantile(q)`, with the quantile taken over `table`'s
    /// non-missing values of `feature`.
    pub fn quantile_above(table: &Table, feature: &str, q: f64) -> Result<Condition, PatternError> {
        let threshold = bind_quantile(table, feature, q)?;
        Ok(Condition {
            feature: feature.to_string(),
            form: ConditionForm::QuantileAbove { q, threshold },
        })
    }

    pub fn quantile_below(table: &Table, feature: &str, q: f64) -> Result<Condition, PatternError> {
        let threshold = bind_quantile(table, feature, q)?;
        Ok(Condition {
            feature: feature.to_string(),
            form: ConditionForm::QuantileBelow { q, threshold },
        })
    }

    pub fn interval(feature: &str, lo: f64, hi: f64) -> Result<Condition, PatternError> {
        if !(lo < hi) {
            return Err(PatternError::InvalidCondition(format!("interval [{lo}, {hi}] on `{feature}`")));
        }
        Ok(Condition {
            feature: feature.to_string(),
            form: ConditionForm::Interval { lo, hi },
        })
    }

    pub fn category_equals(feature: &str, level: &str) -> Condition {
        Condition {
            feature: feature.to_string(),
            form: ConditionForm::CategoryEquals { level: level.to_string() },
        }
    }

    /// Rows of `table` satisfying the condition. Missing values never match.
    pub fn bind(&self, table: &Table) -> Result<Mask, PatternError> {
        let col = table
            .column(&self.feature)
            .ok_or_else(|| PatternError::UnknownFeature(self.feature.clone()))?;
        let n = table.row_count();
        let mut mask = Mask::empty(n);
        match (&self.form, &col.data) {
            (ConditionForm::CategoryEquals { level }, ColumnData::Categorical { codes, levels }) => {
                let code = levels.iter().position(|l| l == level).ok_or_else(|| PatternError::UnknownLevel {
                    feature: self.feature.clone(),
                    level: level.clone(),
                })? as u32;
                for r in 0..n {
                    if !col.missing[r] && codes[r] == code {
                        mask.set(r);
                    }
                }
            }
            (ConditionForm::CategoryEquals { .. }, ColumnData::Numeric(_))
            | (_, ColumnData::Categorical { .. }) => {
                return Err(PatternError::TypeMismatch(self.feature.clone()));
            }
            (form, ColumnData::Numeric(values)) => {
                for r in 0..n {
                    if col.missing[r] {
                        continue;
                    }
                    let v = values[r];
                    let hit = match form {
                        ConditionForm::QuantileAbove { threshold, .. } => v > *threshold,
                        ConditionForm::QuantileBelow { threshold, .. } => v < *threshold,
                        ConditionForm::Interval { lo, hi } => *lo <= v && v <= *hi,
                        ConditionForm::CategoryEquals { .. } => unreachable!(),
                    };
                    if hit {
                        mask.set(r);
                    }
                }
            }
        }
        Ok(mask)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            ConditionForm::QuantileAbove { q, threshold } => {
                write!(f, "{} > {} (top {}%)", self.feature, format_real(*threshold), percent(1.0 - q))
            }
            ConditionForm::QuantileBelow { q, threshold } => {
                write!(f, "{} < {} (bottom {}%)", self.feature, format_real(*threshold), percent(*q))
            }
            ConditionForm::Interval { lo, hi } => {
                write!(f, "{} between {} and {}", self.feature, format_real(*lo), format_real(*hi))
            }
            ConditionForm::CategoryEquals { level } => write!(f, "{} is {}", self.feature, level),
        }
    }
}

fn percent(fraction: f64) -> String {
    format_real((fraction * 1000.0).round() / 10.0)
}

/// Training quantile of a numeric column.
pub fn bind_quantile(table: &Table, feature: &str, q: f64) -> Result<f64, PatternError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(PatternError::InvalidCondition(format!("quantile {q} outside (0, 1)")));
    }
    let col = table
        .column(feature)
        .ok_or_else(|| PatternError::UnknownFeature(feature.to_string()))?;
    if col.as_numeric().is_none() {
        return Err(PatternError::TypeMismatch(feature.to_string()));
    }
    let mut values = col.present_values();
    if values.is_empty() {
        return Err(PatternError::InvalidCondition(format!("`{feature}` has no values")));
    }
    values.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&values, q))
}

impl Condition {
    /// Order by feature, then form, then bounds compared as numbers, so the
    /// order survives any strictly increasing transform of a feature.
    pub fn structural_cmp(&self, other: &Condition) -> Ordering {
        fn rank(f: &ConditionForm) -> u8 {
            match f {
                ConditionForm::QuantileAbove { .. } => 0,
                ConditionForm::QuantileBelow { .. } => 1,
                ConditionForm::Interval { .. } => 2,
                ConditionForm::CategoryEquals { .. } => 3,
            }
        }
        self.feature
            .cmp(&other.feature)
            .then(rank(&self.form).cmp(&rank(&other.form)))
            .then_with(|| match (&self.form, &other.form) {
                (ConditionForm::QuantileAbove { threshold: a, .. }, ConditionForm::QuantileAbove { threshold: b, .. })
                | (ConditionForm::QuantileBelow { threshold: a, .. }, ConditionForm::QuantileBelow { threshold: b, .. }) => {
                    a.total_cmp(b)
                }
                (ConditionForm::Interval { lo: a, hi: c }, ConditionForm::Interval { lo: b, hi: d }) => {
                    a.total_cmp(b).then(c.total_cmp(d))
                }
                (ConditionForm::CategoryEquals { level: a }, ConditionForm::CategoryEquals { level: b }) => a.cmp(b),
                _ => Ordering::Equal,
            })
    }
}

/// Lexicographic [`Condition::structural_cmp`] over two conjunctions.
pub fn cmp_conjunctions(a: &[Condition], b: &[Condition]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.structural_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Rows satisfying every condition.
pub fn bind_conditions(table: &Table, conditions: &[Condition]) -> Result<Mask, PatternError> {
    let mut mask = Mask::full(table.row_count());
    for c in conditions {
        mask.and_assign(&c.bind(table)?);
    }
    Ok(mask)
}
