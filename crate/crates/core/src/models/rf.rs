use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbt::check_binary;
use super::tree::{grow_gini, DecisionTree, GiniParams};
use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ceil(sqrt(p)).
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub allow_constant: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 0,
            allow_constant: false,
        }
    }
}

/// Forest of Gini trees; the class-1 probability is the mean of the leaf
/// class fractions across trees.
#[derive(Debug, Clone, PartialEq)]
pub struct RfModel {
    pub(crate) feature_names: Vec<String>,
    pub(crate) trees: Vec<DecisionTree>,
    /// Seed each tree was grown from (bootstrap draw and feature order).
    pub(crate) tree_seeds: Vec<u64>,
    pub(crate) max_features: usize,
    pub(crate) params: RfParams,
}

pub fn train_rf(x: &FeatureMatrix, y: &LabelVector, params: &RfParams) -> Result<RfModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Parameter("matrix and labels are not aligned".into()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if params.n_trees == 0 || params.min_samples_leaf == 0 {
        return Err(Error::Parameter("rf needs n_trees >= 1 and min_samples_leaf >= 1".into()));
    }
    let yb = check_binary(y, params.allow_constant)?;
    let p = x.n_cols();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p.max(1));
    let rows: Vec<&[f64]> = x.rows().collect();
    let n = rows.len();
    let gini = GiniParams {
        max_features,
        min_samples_leaf: params.min_samples_leaf,
        max_depth: params.max_depth,
    };
    let tree_seeds: Vec<u64> = (0..params.n_trees)
        .map(|k| seed::derive_indexed(params.seed, "rf-tree", k as u64))
        .collect();
    let trees: Vec<DecisionTree> = tree_seeds
        .par_iter()
        .map(|&s| {
            use rand::Rng as _;
            let mut rng = seed::rng(s);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_gini(&rows, &yb, &sample, gini, &mut rng)
        })
        .collect();
    Ok(RfModel {
        feature_names: x.schema().names().to_vec(),
        trees,
        tree_seeds,
        max_features,
        params: params.clone(),
    })
}

impl RfModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn params(&self) -> &RfParams {
        &self.params
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Per-tree class votes (leaf fraction > 0.5).
    pub fn votes(&self, row: &[f64]) -> Vec<u8> {
        self.trees.iter().map(|t| u8::from(t.predict(row) > 0.5)).collect()
    }

    pub fn with_trees(&self, trees: Vec<DecisionTree>) -> Self {
        Self {
            trees,
            ..self.clone()
        }
    }
}
