use sha2::{Digest, Sha256};

use crate::error::{PimError, Result};

/// Response vector plus an `n × d` covariate table.
///
/// Covariates are stored column-major; every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, columns: Vec<Vec<f64>>, column_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(PimError::Data(format!("need at least 2 observations, got {n}")));
        }
        if columns.is_empty() {
            return Err(PimError::Data("need at least one covariate column".into()));
        }
        if columns.len() != column_names.len() {
            return Err(PimError::Data(format!(
                "{} columns but {} column names",
                columns.len(),
                column_names.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(PimError::Data(format!("response value at row {i} is not finite")));
        }
        for (name, col) in column_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(PimError::Data(format!(
                    "column '{name}' has {} rows, response has {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(PimError::Data(format!(
                    "column '{name}' has a non-finite value at row {i}"
                )));
            }
        }
        for (k, name) in column_names.iter().enumerate() {
            if column_names[..k].contains(name) {
                return Err(PimError::Data(format!("duplicate column name '{name}'")));
            }
        }
        Ok(Self {
            y,
            columns,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.column_index(name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| PimError::Config(format!("unknown column '{name}'")))
    }

    pub fn column_at(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    /// Rows `rows` (in the given order) as a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let y = rows.iter().map(|&r| self.y[r]).collect();
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Dataset::new(y, columns, self.column_names.clone())
    }

    /// Same rows with every response passed through `f`.
    pub fn map_response(&self, f: impl Fn(f64) -> f64) -> Result<Dataset> {
        Dataset::new(
            self.y.iter().map(|&v| f(v)).collect(),
            self.columns.clone(),
            self.column_names.clone(),
        )
    }

    /// SHA-256 over names and the exact bit patterns of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for v in &self.y {
            h.update(v.to_bits().to_le_bytes());
        }
        for (name, col) in self.column_names.iter().zip(&self.columns) {
            h.update(name.as_bytes());
            h.update([0u8]);
            for v in col {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
