//! Shapley-value attributions (exact, tree, permutation sampling), global
//! SHAP summaries, LIME surrogates and force-plot breakdowns.

mod exact;
mod force;
mod global;
mod lime;
mod sampling;
mod tree_shap;

use serde::{Deserialize, Serialize};

pub use exact::{shap_exact, EXACT_MAX_FEATURES};
pub use force::{force_breakdown, ForceBreakdown, ForceEntry, FORCE_DIRECTION};
pub use global::{shap_global, GlobalShapSummary, DEFAULT_SIGNIFICANCE_FLOOR};
pub use lime::{lime_explain, LimeExplanation, LimeFeature, LimeParams};
pub use sampling::shap_sampling;
pub use tree_shap::shap_tree;

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{Model, OutputSpace, TrainedModel};
use crate::seed;

/// Attributions for one instance: `base_value + sum(phi) == output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapValues {
    pub phi: Vec<f64>,
    /// Mean model output over the background set, in `output_space`.
    pub base_value: f64,
    /// Model output for the instance, in `output_space`.
    pub output: f64,
    pub output_space: OutputSpace,
    /// Mean class-1 probability over the background set.
    pub probability_base: f64,
    /// Per-feature standard error (sampling estimator only).
    pub std_errors: Option<Vec<f64>>,
    pub instance_hash: u64,
}

impl ShapValues {
    pub fn sum(&self) -> f64 {
        self.phi.iter().sum()
    }

    /// `|base + sum(phi) - output|`.
    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.sum() - self.output).abs()
    }

    /// Decision threshold in this output space.
    pub fn threshold(&self) -> f64 {
        match self.output_space {
            OutputSpace::Margin => 0.0,
            OutputSpace::Probability => 0.5,
        }
    }

    /// Class implied by the attributions.
    pub fn implied_class(&self) -> u8 {
        u8::from(self.base_value + self.sum() > self.threshold())
    }

    /// Feature indices by descending `|phi|`; ties go to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.phi.len()).collect();
        idx.sort_by(|&a, &b| self.phi[b].abs().total_cmp(&self.phi[a].abs()).then(a.cmp(&b)));
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShapMethod {
    Exact,
    Tree,
    Sampling { n_permutations: usize, seed: u64 },
}

/// Picks the tree explainer for tree models and permutation sampling for
/// everything else.
pub fn default_method(model: &TrainedModel, n_permutations: usize, seed: u64) -> ShapMethod {
    match model {
        TrainedModel::Knn(_) => ShapMethod::Sampling { n_permutations, seed },
        _ => ShapMethod::Tree,
    }
}

/// Explains `x` with `method`. `instance` feeds the per-instance child seed
/// of the sampling estimator.
pub fn explain_instance(
    model: &TrainedModel,
    x: &[f64],
    background: &FeatureMatrix,
    method: ShapMethod,
    instance: u64,
) -> Result<ShapValues> {
    match method {
        ShapMethod::Exact => shap_exact(model, x, background, model.native_space()),
        ShapMethod::Tree => shap_tree(model, x, background),
        ShapMethod::Sampling { n_permutations, seed } => shap_sampling(
            model,
            x,
            background,
            n_permutations,
            seed::derive_indexed(seed, "shap-instance", instance),
            model.native_space(),
        ),
    }
}

pub(crate) fn check_inputs(model: &dyn Model, x: &[f64], background: &FeatureMatrix) -> Result<()> {
    let p = model.n_features();
    if x.len() != p || background.n_cols() != p {
        return Err(Error::Schema(format!(
            "model has {p} features, instance {} and background {}",
            x.len(),
            background.n_cols()
        )));
    }
    if background.is_empty() {
        return Err(Error::EmptyInput("background set is empty".into()));
    }
    Ok(())
}

pub(crate) fn mean_probability(model: &dyn Model, background: &FeatureMatrix) -> f64 {
    background.rows().map(|b| model.predict_proba_row(b)).sum::<f64>() / background.n_rows() as f64
}

/// Seeded sample of up to `n` rows, in ascending row order.
pub fn sample_background(x: &FeatureMatrix, n: usize, seed: u64) -> FeatureMatrix {
    use rand::seq::index::sample;
    if n >= x.n_rows() {
        return x.clone();
    }
    let mut idx = sample(&mut seed::rng(seed), x.n_rows(), n).into_vec();
    idx.sort_unstable();
    x.select_rows(&idx)
}
