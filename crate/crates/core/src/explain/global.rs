use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{explain_instance, ShapMethod, ShapValues};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{ImportanceMethod, ImportanceVector, Model, OutputSpace, TrainedModel};

/// Features whose mean `|phi|` exceeds this share of the total are listed
/// as significant.
pub const DEFAULT_SIGNIFICANCE_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalShapSummary {
    pub feature_names: Vec<String>,
    pub output_space: OutputSpace,
    /// Mean `|phi|` over the whole evaluation set.
    pub mean_abs: Vec<f64>,
    /// Mean `|phi|` over rows predicted as class 0 and class 1.
    pub mean_abs_by_class: [Vec<f64>; 2],
    pub class_counts: [usize; 2],
    /// Feature indices by descending `mean_abs`, ties to the lower index.
    pub ranking: Vec<usize>,
    pub significance_floor: f64,
    /// Indices above the floor, in ranking order.
    pub significant: Vec<usize>,
}

impl GlobalShapSummary {
    /// Aggregates per-instance attributions; `classes[i]` is the predicted
    /// class of instance `i`.
    pub fn from_values(
        feature_names: Vec<String>,
        values: &[ShapValues],
        classes: &[u8],
        significance_floor: f64,
    ) -> Result<Self> {
        let p = feature_names.len();
        if values.is_empty() {
            return Err(Error::EmptyInput("no explained instances".into()));
        }
        let space = values[0].output_space;
        let mut total = vec![0.0; p];
        let mut by_class = [vec![0.0; p], vec![0.0; p]];
        let mut counts = [0usize; 2];
        for (s, &c) in values.iter().zip(classes) {
            counts[c as usize] += 1;
            for j in 0..p {
                total[j] += s.phi[j].abs();
                by_class[c as usize][j] += s.phi[j].abs();
            }
        }
        let n = values.len() as f64;
        let mean_abs: Vec<f64> = total.iter().map(|t| t / n).collect();
        for (c, row) in by_class.iter_mut().enumerate() {
            if counts[c] > 0 {
                for v in row.iter_mut() {
                    *v /= counts[c] as f64;
                }
            }
        }
        let mut ranking: Vec<usize> = (0..p).collect();
        ranking.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
        let sum: f64 = mean_abs.iter().sum();
        let significant = ranking
            .iter()
            .copied()
            .filter(|&j| sum > 0.0 && mean_abs[j] > significance_floor * sum)
            .collect();
        Ok(Self {
            feature_names,
            output_space: space,
            mean_abs,
            mean_abs_by_class: by_class,
            class_counts: counts,
            ranking,
            significance_floor,
            significant,
        })
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        self.ranking.iter().copied().take(k).collect()
    }

    pub fn to_importance(&self) -> ImportanceVector {
        ImportanceVector {
            method: ImportanceMethod::ShapGlobal,
            feature_names: self.feature_names.clone(),
            scores: self.mean_abs.clone(),
        }
    }
}

/// Explains every row of `x_eval` (in parallel) and aggregates.
/// Returns the summary together with the per-row attributions.
pub fn shap_global(
    model: &TrainedModel,
    x_eval: &FeatureMatrix,
    background: &FeatureMatrix,
    method: ShapMethod,
    significance_floor: f64,
) -> Result<(GlobalShapSummary, Vec<ShapValues>)> {
    if x_eval.is_empty() {
        return Err(Error::EmptyInput("evaluation set is empty".into()));
    }
    if x_eval.schema().names() != model.feature_names() {
        return Err(Error::Schema("evaluation columns differ from the model's features".into()));
    }
    let values: Vec<ShapValues> = (0..x_eval.n_rows())
        .into_par_iter()
        .map(|i| explain_instance(model, x_eval.row(i), background, method, i as u64))
        .collect::<Result<_>>()?;
    let classes: Vec<u8> = x_eval.rows().map(|r| model.predict_class_row(r)).collect();
    let summary = GlobalShapSummary::from_values(model.feature_names().to_vec(), &values, &classes, significance_floor)?;
    Ok((summary, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(phi: Vec<f64>) -> ShapValues {
        ShapValues {
            phi,
            base_value: 0.0,
            output: 0.0,
            output_space: OutputSpace::Margin,
            probability_base: 0.5,
            std_errors: None,
            instance_hash: 0,
        }
    }

    #[test]
    fn means_split_by_class_and_rank_descending() {
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        let vals = [sv(vec![1.0, -2.0, 0.0]), sv(vec![-3.0, 0.0, 0.0]), sv(vec![0.0, 2.0, 0.0])];
        let g = GlobalShapSummary::from_values(names, &vals, &[0, 1, 1], DEFAULT_SIGNIFICANCE_FLOOR).unwrap();
        assert_eq!(g.mean_abs, vec![4.0 / 3.0, 4.0 / 3.0, 0.0]);
        assert_eq!(g.ranking, vec![0, 1, 2]);
        assert_eq!(g.mean_abs_by_class[0], vec![1.0, 2.0, 0.0]);
        assert_eq!(g.mean_abs_by_class[1], vec![1.5, 1.0, 0.0]);
        assert_eq!(g.class_counts, [1, 2]);
        assert_eq!(g.significant, vec![0, 1]);
    }

    #[test]
    fn all_zero_has_no_significant_features() {
        let g = GlobalShapSummary::from_values(vec!["a".into(), "b".into()], &[sv(vec![0.0, 0.0])], &[0], 0.001).unwrap();
        assert!(g.significant.is_empty());
        assert_eq!(g.mean_abs, vec![0.0, 0.0]);
    }
}
