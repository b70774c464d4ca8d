//! Matrix persistence: headered CSV plus a TOML sidecar.
//!
//! CSV layout: the schema's feature columns in order, then any extra string
//! columns (for example `label`, `binary`, `synthetic`). Floats are written
//! in shortest round-trip form, so a write/read cycle is bit-exact.
//!
//! The sidecar is a flat TOML document (`<name>.meta.toml`) holding the
//! schema, scaler stats, taxonomy, seeds and stage counters. See
//! [`DatasetMeta`] for the keys.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use super::schema::{FeatureSchema, LabelTaxonomy};
use crate::error::{Error, Result};

pub fn write_matrix_csv(path: &Path, matrix: &FeatureMatrix, extras: &[(&str, &[String])]) -> Result<()> {
    for (name, col) in extras {
        if col.len() != matrix.n_rows() {
            return Err(Error::Parameter(format!(
                "extra column `{name}` has {} rows, matrix has {}",
                col.len(),
                matrix.n_rows()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| into_io(path, e))?;
    let header: Vec<&str> = matrix
        .schema()
        .names()
        .iter()
        .map(String::as_str)
        .chain(extras.iter().map(|(n, _)| *n))
        .collect();
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in matrix.rows().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.extend(extras.iter().map(|(_, col)| col[i].clone()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn into_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a CSV written by [`write_matrix_csv`]. Columns named in `extras`
/// are returned as strings; every other column is a feature.
pub fn read_matrix_csv(path: &Path, extras: &[&str]) -> Result<(FeatureMatrix, BTreeMap<String, Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| into_io(path, e))?;
    let headers = r.headers()?.clone();
    let mut feature_cols = Vec::new();
    let mut extra_cols = BTreeMap::new();
    for (c, h) in headers.iter().enumerate() {
        if extras.contains(&h) {
            extra_cols.insert(h.to_string(), c);
        } else {
            feature_cols.push((c, h.to_string()));
        }
    }
    for e in extras {
        if !extra_cols.contains_key(*e) {
            return Err(Error::Schema(format!("{}: missing column `{e}`", path.display())));
        }
    }
    let schema = Arc::new(FeatureSchema::new(feature_cols.iter().map(|(_, n)| n.clone()).collect())?);
    let mut values = Vec::new();
    let mut out: BTreeMap<String, Vec<String>> = extras.iter().map(|e| (e.to_string(), Vec::new())).collect();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for (c, name) in &feature_cols {
            let v: f64 = rec[*c].parse().map_err(|_| Error::AtLine {
                path: path.to_path_buf(),
                line,
                source: Box::new(Error::Schema(format!("column `{name}` is not numeric"))),
            })?;
            values.push(v);
        }
        for (name, &c) in &extra_cols {
            out.get_mut(name).expect("initialized").push(rec[c].to_string());
        }
        n += 1;
    }
    Ok((FeatureMatrix::new(schema, n, values)?, out))
}

pub const META_FORMAT: &str = "explia-dataset/1";

/// Sidecar metadata for a persisted matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format: String,
    pub rows: usize,
    /// Feature names of the persisted matrix, in column order.
    pub features: Vec<String>,
    /// Column count before zero-variance removal.
    pub raw_width: usize,
    /// Names of the raw columns that were removed.
    #[serde(default)]
    pub dropped_columns: Vec<String>,
    /// Scaler fitted on the raw columns (all `raw_width` of them).
    #[serde(default)]
    pub scaler: Option<ScalerMeta>,
    pub taxonomy: TaxonomyMeta,
    pub seed: u64,
    #[serde(default)]
    pub counters: BTreeMap<String, u64>,
    /// Row indices holding SMOTE-generated rows.
    #[serde(default)]
    pub synthetic_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalerMeta {
    pub features: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub n_fit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyMeta {
    pub benign_class: String,
    pub class_of: BTreeMap<String, String>,
}

impl From<&LabelTaxonomy> for TaxonomyMeta {
    fn from(t: &LabelTaxonomy) -> Self {
        Self {
            benign_class: t.benign_class().to_string(),
            class_of: t
                .subcategory_names()
                .into_iter()
                .map(|s| {
                    let c = t.class_of(&s).expect("own subcategory").to_string();
                    (s, c)
                })
                .collect(),
        }
    }
}

impl TaxonomyMeta {
    pub fn to_taxonomy(&self) -> Result<LabelTaxonomy> {
        LabelTaxonomy::new(self.class_of.clone(), self.benign_class.clone())
    }
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Parameter(format!("toml encode: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
