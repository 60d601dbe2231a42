use crate::error::{AuditError, Result};

/// Dense row-major `n × d` matrix of per-subject features, with row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(AuditError::Data("feature matrix has no columns".into()));
        }
        if data.len() != ids.len() * cols {
            return Err(AuditError::Data(format!(
                "feature matrix has {} values, expected {} rows x {} columns",
                data.len(),
                ids.len(),
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(AuditError::Data(format!(
                "non-finite feature value for subject {:?}, column {}",
                ids[pos / cols],
                pos % cols
            )));
        }
        Ok(FeatureMatrix { ids, cols, data })
    }

    /// Unlabelled matrix; rows get ids `"0"`, `"1"`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AuditError::Data("ragged feature rows".into()));
        }
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        FeatureMatrix::new(ids, cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.ids[r].clone());
        }
        FeatureMatrix {
            ids,
            cols: self.cols,
            data,
        }
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.get(i, j)).collect()
    }
}
