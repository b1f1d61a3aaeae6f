//! Dense column-major feature matrix consumed by the models.

use crate::table::{ColumnData, ColumnRole, Table};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        Matrix {
            rows,
            cols,
            data: columns.into_iter().flatten().collect(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, p);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), p, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn col(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn col_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row_into(&self, row: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.cols).map(|j| self.get(row, j)));
    }

    pub fn take_rows(&self, rows: &[usize]) -> Matrix {
        let columns = (0..self.cols)
            .map(|j| {
                let col = self.col(j);
                rows.iter().map(|&r| col[r]).collect()
            })
            .collect::<Vec<Vec<f64>>>();
        let mut m = Matrix::from_columns(columns);
        m.rows = rows.len();
        m
    }
}

/// Features and (optional) targets of an encoded table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>) -> Self {
        assert_eq!(x.rows(), y.len());
        assert_eq!(x.cols(), feature_names.len());
        Dataset { x, y, feature_names }
    }

    /// Builds a dataset from an encoded table: every numeric feature column is
    /// a model input, the target (numeric, or coded with code 1 as positive)
    /// becomes `y`. Tables without a target yield an empty `y` of zeros.
    pub fn from_encoded(table: &Table) -> Result<Self, String> {
        let mut columns = Vec::new();
        let mut names = Vec::new();
        for col in table.columns() {
            if col.schema.role != ColumnRole::Feature {
                continue;
            }
            match &col.data {
                ColumnData::Numeric(v) => {
                    columns.push(v.clone());
                    names.push(col.name().to_string());
                }
                ColumnData::Categorical { .. } => {
                    return Err(format!("feature `{}` is not numeric-encoded", col.name()))
                }
            }
        }
        let y = match table.target() {
            Some(t) => match &t.data {
                ColumnData::Numeric(v) => v.clone(),
                ColumnData::Categorical { codes, .. } => codes.iter().map(|&c| c as f64).collect(),
            },
            None => vec![0.0; table.row_count()],
        };
        let mut x = Matrix::from_columns(columns);
        x.rows = table.row_count();
        Ok(Dataset::new(x, y, names))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.take_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(m.col(1), [2.0, 4.0, 6.0]);
        assert_eq!(m.get(2, 0), 5.0);
        let t = m.take_rows(&[2, 0]);
        assert_eq!(t.col(0), [5.0, 1.0]);
        assert_eq!(t.rows(), 2);
    }
}
