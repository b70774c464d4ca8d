use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, LabelLevel};
use crate::error::{Error, Result};

/// Dense row-major n x p table of finite values tied to one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: Arc<FeatureSchema>,
    n_rows: usize,
    values: Vec<f64>,
    scaler: Option<ScalerStats>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values; rejects NaN/infinity.
    pub fn new(schema: Arc<FeatureSchema>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        let p = schema.width();
        if values.len() != n_rows * p {
            return Err(Error::Schema(format!(
                "{} values cannot form {n_rows} rows of width {p}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite value at row {}, column `{}`",
                pos / p.max(1),
                schema.name(pos % p.max(1))
            )));
        }
        Ok(Self {
            schema,
            n_rows,
            values,
            scaler: None,
        })
    }

    pub fn from_rows(schema: Arc<FeatureSchema>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = schema.width();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Schema(format!("row {i} has width {}, expected {p}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(schema, rows.len(), values)
    }

    /// Matrix with generated column names `x0..x{p-1}`.
    pub fn from_rows_anonymous(rows: &[Vec<f64>], p: usize) -> Result<Self> {
        let schema = FeatureSchema::new((0..p).map(|j| format!("x{j}")).collect())?;
        Self::from_rows(Arc::new(schema), rows)
    }

    pub fn empty(schema: Arc<FeatureSchema>) -> Self {
        Self {
            schema,
            n_rows: 0,
            values: Vec::new(),
            scaler: None,
        }
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.width()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let p = self.n_cols().max(1);
        let n = self.n_rows;
        (0..n).map(move |i| &self.values[i * p..(i + 1) * p])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_standardized(&self) -> bool {
        self.scaler.is_some()
    }

    /// Stats that standardized this matrix, if any.
    pub fn scaler(&self) -> Option<&ScalerStats> {
        self.scaler.as_ref()
    }

    pub(crate) fn with_scaler(mut self, scaler: Option<ScalerStats>) -> Self {
        self.scaler = scaler;
        self
    }

    pub fn check_schema(&self, other: &FeatureSchema) -> Result<()> {
        if self.schema.names() != other.names() {
            return Err(Error::Schema(format!(
                "matrix has {} columns [{}...], expected {} [{}...]",
                self.n_cols(),
                self.schema.names().first().map(String::as_str).unwrap_or(""),
                other.width(),
                other.names().first().map(String::as_str).unwrap_or("")
            )));
        }
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            schema: Arc::clone(&self.schema),
            n_rows: idx.len(),
            values,
            scaler: self.scaler.clone(),
        }
    }

    /// Keeps columns `kept` in order; the schema and any scaler are re-derived.
    pub fn select_columns(&self, kept: &[usize]) -> Self {
        let schema = Arc::new(self.schema.select(kept));
        let mut values = Vec::with_capacity(self.n_rows * kept.len());
        for r in self.rows() {
            values.extend(kept.iter().map(|&j| r[j]));
        }
        let scaler = self.scaler.as_ref().map(|s| s.select(kept, Arc::clone(&schema)));
        Self {
            schema,
            n_rows: self.n_rows,
            values,
            scaler,
        }
    }

    /// Appends the rows of `other` (same schema).
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<Self> {
        other.check_schema(&self.schema)?;
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self {
            schema: Arc::clone(&self.schema),
            n_rows: self.n_rows + other.n_rows,
            values,
            scaler: self.scaler.clone(),
        })
    }
}

/// Per-row integer labels at one taxonomy level; `names[id]` decodes an id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    level: LabelLevel,
    ids: Vec<u32>,
    names: Vec<String>,
}

impl LabelVector {
    pub fn new(level: LabelLevel, ids: Vec<u32>, names: Vec<String>) -> Result<Self> {
        if let Some(bad) = ids.iter().find(|&&id| id as usize >= names.len()) {
            return Err(Error::Parameter(format!(
                "label id {bad} out of range for {} names",
                names.len()
            )));
        }
        Ok(Self { level, ids, names })
    }

    /// Binary vector (0 benign, 1 attack).
    pub fn binary(ids: Vec<u32>) -> Result<Self> {
        Self::new(
            LabelLevel::Binary,
            ids,
            super::schema::BINARY_NAMES.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn level(&self) -> LabelLevel {
        self.level
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_of(&self, row: usize) -> &str {
        &self.names[self.ids[row] as usize]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            level: self.level,
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            names: self.names.clone(),
        }
    }

    /// Row count per id.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.names.len()];
        for &id in &self.ids {
            c[id as usize] += 1;
        }
        c
    }

    /// Binary labels as `u8`, erroring if the vector is not binary.
    pub fn as_binary(&self) -> Result<Vec<u8>> {
        if self.level != LabelLevel::Binary {
            return Err(Error::Parameter(format!(
                "expected binary labels, got {:?} level",
                self.level
            )));
        }
        Ok(self.ids.iter().map(|&i| i as u8).collect())
    }
}

/// Per-feature mean and population standard deviation (divide by n).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerStats {
    schema: Arc<FeatureSchema>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub n_fit: usize,
}

impl ScalerStats {
    pub fn new(schema: Arc<FeatureSchema>, means: Vec<f64>, stds: Vec<f64>, n_fit: usize) -> Result<Self> {
        if means.len() != schema.width() || stds.len() != schema.width() {
            return Err(Error::Schema("scaler width does not match schema".into()));
        }
        if stds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Parameter("standard deviations must be >= 0".into()));
        }
        Ok(Self {
            schema,
            means,
            stds,
            n_fit,
        })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    /// Indices of features with zero spread.
    pub fn zero_variance(&self) -> Vec<usize> {
        (0..self.stds.len()).filter(|&j| self.stds[j] == 0.0).collect()
    }

    pub fn is_flagged(&self, j: usize) -> bool {
        self.stds[j] == 0.0
    }

    fn select(&self, kept: &[usize], schema: Arc<FeatureSchema>) -> Self {
        Self {
            schema,
            means: kept.iter().map(|&j| self.means[j]).collect(),
            stds: kept.iter().map(|&j| self.stds[j]).collect(),
            n_fit: self.n_fit,
        }
    }

    /// Maps standardized values back to the original scale.
    pub fn inverse(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        matrix.check_schema(&self.schema)?;
        let p = matrix.n_cols();
        let mut values = matrix.values().to_vec();
        for (k, v) in values.iter_mut().enumerate() {
            let j = k % p;
            if self.stds[j] > 0.0 {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        FeatureMatrix::new(Arc::clone(matrix.schema()), matrix.n_rows(), values)
    }
}
