//! The three classifiers (boosted trees, random forest, KNN), their
//! evaluation, feature importance and text serialization.

mod document;
mod gbt;
mod importance;
mod knn;
mod metrics;
mod rf;
mod tree;

use serde::{Deserialize, Serialize};

pub use document::{deserialize, serialize, DOCUMENT_VERSION};
pub use gbt::{logistic, logistic_loss, train_gbt, GbtModel, GbtParams};
pub use importance::{importance_gain, importance_permutation, ImportanceMethod, ImportanceVector};
pub use knn::{train_knn, KnnModel, KnnParams};
pub(crate) use knn::{select_k, Neighbor};
pub use metrics::Metrics;
pub use rf::{train_rf, RfModel, RfParams};
pub use tree::{DecisionTree, Node};

use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

/// Space in which a model output is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputSpace {
    /// Log-odds.
    Margin,
    Probability,
}

/// Anything that scores a row with a class-1 probability.
pub trait Model: Sync {
    fn n_features(&self) -> usize;

    fn predict_proba_row(&self, row: &[f64]) -> f64;

    /// Log-odds output, when the model has one natively.
    fn margin_row(&self, _row: &[f64]) -> Option<f64> {
        None
    }

    fn native_space(&self) -> OutputSpace {
        OutputSpace::Probability
    }

    fn predict_class_row(&self, row: &[f64]) -> u8 {
        u8::from(self.predict_proba_row(row) > 0.5)
    }

    /// Output in `space`; panics if the model has no margin and one is asked.
    fn output_row(&self, row: &[f64], space: OutputSpace) -> f64 {
        match space {
            OutputSpace::Probability => self.predict_proba_row(row),
            OutputSpace::Margin => self
                .margin_row(row)
                .expect("model has no margin output; check supports() first"),
        }
    }

    fn supports(&self, space: OutputSpace) -> bool {
        match space {
            OutputSpace::Probability => true,
            OutputSpace::Margin => self.margin_row(&vec![0.0; self.n_features()]).is_some(),
        }
    }
}

/// Closure-backed model for tests and toy problems.
pub struct FnModel<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Model for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbt,
    Rf,
    Knn,
}

impl ModelKind {
    /// Selection order on equal accuracy.
    pub const PRIORITY: [ModelKind; 3] = [ModelKind::Gbt, ModelKind::Rf, ModelKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Rf => "rf",
            ModelKind::Knn => "knn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbt" | "xgboost" => Ok(ModelKind::Gbt),
            "rf" | "random_forest" => Ok(ModelKind::Rf),
            "knn" => Ok(ModelKind::Knn),
            other => Err(Error::Parameter(format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Gbt(GbtModel),
    Rf(RfModel),
    Knn(KnnModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Gbt(_) => ModelKind::Gbt,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Knn(_) => ModelKind::Knn,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Gbt(m) => &m.feature_names,
            TrainedModel::Rf(m) => &m.feature_names,
            TrainedModel::Knn(m) => &m.feature_names,
        }
    }

    fn check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.schema().names() != self.feature_names() {
            return Err(Error::Schema(format!(
                "{} model was trained on {} features, input has {}",
                self.kind(),
                self.feature_names().len(),
                x.n_cols()
            )));
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.rows().map(|r| self.predict_proba_row(r)).collect())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        self.check(x)?;
        Ok(x.rows().map(|r| self.predict_class_row(r)).collect())
    }

    pub fn evaluate(&self, x: &FeatureMatrix, y: &LabelVector) -> Result<Metrics> {
        let actual = y.as_binary()?;
        if actual.len() != x.n_rows() {
            return Err(Error::Parameter("matrix and labels are not aligned".into()));
        }
        Ok(Metrics::from_predictions(&actual, &self.predict(x)?))
    }

    pub fn as_gbt(&self) -> Option<&GbtModel> {
        match self {
            TrainedModel::Gbt(m) => Some(m),
            _ => None,
        }
    }
}

impl Model for GbtModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        logistic(self.margin(row))
    }

    fn margin_row(&self, row: &[f64]) -> Option<f64> {
        Some(self.margin(row))
    }

    fn native_space(&self) -> OutputSpace {
        OutputSpace::Margin
    }

    fn predict_class_row(&self, row: &[f64]) -> u8 {
        u8::from(self.margin(row) > 0.0)
    }
}

impl Model for RfModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.proba(row)
    }
}

impl Model for KnnModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.proba(row)
    }

    fn predict_class_row(&self, row: &[f64]) -> u8 {
        self.predict_label(row)
    }
}

impl Model for TrainedModel {
    fn n_features(&self) -> usize {
        self.feature_names().len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        match self {
            TrainedModel::Gbt(m) => m.predict_proba_row(row),
            TrainedModel::Rf(m) => m.predict_proba_row(row),
            TrainedModel::Knn(m) => m.predict_proba_row(row),
        }
    }

    fn margin_row(&self, row: &[f64]) -> Option<f64> {
        match self {
            TrainedModel::Gbt(m) => m.margin_row(row),
            _ => None,
        }
    }

    fn native_space(&self) -> OutputSpace {
        match self {
            TrainedModel::Gbt(_) => OutputSpace::Margin,
            _ => OutputSpace::Probability,
        }
    }

    fn predict_class_row(&self, row: &[f64]) -> u8 {
        match self {
            TrainedModel::Gbt(m) => m.predict_class_row(row),
            TrainedModel::Rf(m) => m.predict_class_row(row),
            TrainedModel::Knn(m) => m.predict_class_row(row),
        }
    }
}

/// Hyperparameters for all three model kinds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub gbt: GbtParams,
    pub rf: RfParams,
    pub knn: KnnParams,
}

pub fn train(kind: ModelKind, x: &FeatureMatrix, y: &LabelVector, params: &ModelParams) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Gbt => TrainedModel::Gbt(train_gbt(x, y, &params.gbt)?),
        ModelKind::Rf => TrainedModel::Rf(train_rf(x, y, &params.rf)?),
        ModelKind::Knn => TrainedModel::Knn(train_knn(x, y, params.knn.k)?),
    })
}
