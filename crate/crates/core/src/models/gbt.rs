use serde::{Deserialize, Serialize};

use super::tree::{grow_newton, DecisionTree, NewtonParams, Presorted};
use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    pub seed: u64,
    /// Permit a single-class training set (yields a constant model).
    pub allow_constant: bool,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
            seed: 0,
            allow_constant: false,
        }
    }
}

/// Logistic-loss boosted ensemble: `margin(x) = base_score + lr * sum_k tree_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub(crate) feature_names: Vec<String>,
    pub(crate) trees: Vec<DecisionTree>,
    pub(crate) learning_rate: f64,
    pub(crate) base_score: f64,
    pub(crate) params: GbtParams,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_binary(y: &LabelVector, allow_constant: bool) -> Result<Vec<u8>> {
    let yb = y.as_binary()?;
    if !allow_constant {
        let ones = yb.iter().filter(|&&v| v == 1).count();
        if ones == 0 {
            return Err(Error::DegenerateLabels(0));
        }
        if ones == yb.len() {
            return Err(Error::DegenerateLabels(1));
        }
    }
    Ok(yb)
}

pub fn train_gbt(x: &FeatureMatrix, y: &LabelVector, params: &GbtParams) -> Result<GbtModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Parameter("matrix and labels are not aligned".into()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if !(params.learning_rate > 0.0) || params.lambda < 0.0 || params.n_trees == 0 {
        return Err(Error::Parameter(
            "gbt needs learning_rate > 0, lambda >= 0 and n_trees >= 1".into(),
        ));
    }
    let yb = check_binary(y, params.allow_constant)?;
    let n = x.n_rows();
    let rows: Vec<&[f64]> = x.rows().collect();
    let data = Presorted::new(&rows, x.n_cols());

    let mean = yb.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let prior = mean.clamp(1e-6, 1.0 - 1e-6);
    let base_score = (prior / (1.0 - prior)).ln();

    let tree_params = NewtonParams {
        max_depth: params.max_depth,
        lambda: params.lambda,
        min_child_weight: params.min_child_weight,
    };
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = logistic(margin[i]);
            grad[i] = p - f64::from(yb[i]);
            hess[i] = p * (1.0 - p);
        }
        let tree = grow_newton(&data, &grad, &hess, tree_params);
        for (i, r) in rows.iter().enumerate() {
            margin[i] += params.learning_rate * tree.predict(r);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        feature_names: x.schema().names().to_vec(),
        trees,
        learning_rate: params.learning_rate,
        base_score,
        params: params.clone(),
    })
}

impl GbtModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn params(&self) -> &GbtParams {
        &self.params
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Build directly from parts (used by tests and the document reader).
    pub fn from_parts(
        feature_names: Vec<String>,
        trees: Vec<DecisionTree>,
        learning_rate: f64,
        base_score: f64,
        params: GbtParams,
    ) -> Result<Self> {
        let p = feature_names.len();
        if trees.iter().any(|t| t.max_feature().is_some_and(|f| f >= p)) {
            return Err(Error::Parameter("tree references a feature outside the schema".into()));
        }
        Ok(Self {
            feature_names,
            trees,
            learning_rate,
            base_score,
            params,
        })
    }
}

/// Mean logistic loss of `margins` against binary labels.
pub fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| {
            // log(1 + e^m) - t*m, computed stably
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - f64::from(t) * m
        })
        .sum::<f64>()
        / margins.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert_eq!(logistic(800.0), 1.0);
    }

    #[test]
    fn loss_matches_direct_formula() {
        let m = [0.3, -1.2];
        let y = [1, 0];
        let direct = (-(logistic(0.3)).ln() - (1.0 - logistic(-1.2)).ln()) / 2.0;
        assert!((logistic_loss(&m, &y) - direct).abs() < 1e-12);
    }
}
