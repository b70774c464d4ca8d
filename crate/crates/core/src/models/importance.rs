use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::knn::{select_k, vote_label, KnnModel, Neighbor};
use super::{Model, TrainedModel};
use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    /// Split-gain totals, normalized to sum 1.
    Gain,
    /// Accuracy drop when one column is shuffled.
    Permutation,
    /// Mean absolute SHAP value.
    ShapGlobal,
    /// Mean absolute LIME weight.
    LimeGlobal,
}

impl ImportanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImportanceMethod::Gain => "gain",
            ImportanceMethod::Permutation => "permutation",
            ImportanceMethod::ShapGlobal => "shap_global",
            ImportanceMethod::LimeGlobal => "lime_global",
        }
    }
}

/// One score per feature, aligned with `feature_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub method: ImportanceMethod,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(method: ImportanceMethod, feature_names: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        if feature_names.len() != scores.len() {
            return Err(Error::Parameter(format!(
                "{} names but {} scores",
                feature_names.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Parameter("importance scores must be finite".into()));
        }
        Ok(Self {
            method,
            feature_names,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Feature indices by descending score; ties go to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut r = self.ranking();
        r.truncate(k);
        r
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.feature_names.iter().position(|n| n == name).map(|i| self.scores[i])
    }

    /// 1-based rank of a feature by name.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        let i = self.feature_names.iter().position(|n| n == name)?;
        self.ranking().iter().position(|&j| j == i).map(|r| r + 1)
    }
}

/// Normalized total split gain per feature; features never split on score 0.
pub fn importance_gain(model: &TrainedModel) -> Result<ImportanceVector> {
    let trees = match model {
        TrainedModel::Gbt(m) => m.trees(),
        TrainedModel::Rf(m) => m.trees(),
        TrainedModel::Knn(_) => {
            return Err(Error::MethodMismatch(
                "gain importance needs a tree model; use permutation for knn".into(),
            ))
        }
    };
    let mut acc = vec![0.0; model.feature_names().len()];
    for t in trees {
        t.accumulate_gain(&mut acc);
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        for a in &mut acc {
            *a /= total;
        }
    }
    ImportanceVector::new(ImportanceMethod::Gain, model.feature_names().to_vec(), acc)
}

/// Baseline accuracy minus mean accuracy after shuffling each column,
/// averaged over `repeats` seeded permutations.
pub fn importance_permutation(
    model: &TrainedModel,
    x: &FeatureMatrix,
    y: &LabelVector,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    if repeats == 0 {
        return Err(Error::Parameter("permutation importance needs repeats >= 1".into()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("no rows to permute".into()));
    }
    let actual = y.as_binary()?;
    if actual.len() != x.n_rows() {
        return Err(Error::Parameter("matrix and labels are not aligned".into()));
    }
    if x.schema().names() != model.feature_names() {
        return Err(Error::Schema("input columns differ from the model's features".into()));
    }
    let n = x.n_rows() as f64;
    let scores = match model {
        TrainedModel::Knn(knn) => permutation_knn(knn, x, &actual, repeats, seed),
        _ => {
            let base = accuracy(model, x, &actual, None);
            (0..x.n_cols())
                .map(|j| {
                    let mut sum = 0.0;
                    for r in 0..repeats {
                        let perm = permutation(x.n_rows(), seed, j, r);
                        sum += accuracy(model, x, &actual, Some((j, &perm)));
                    }
                    (base - sum / repeats as f64) / n
                })
                .collect()
        }
    };
    ImportanceVector::new(ImportanceMethod::Permutation, model.feature_names().to_vec(), scores)
}

fn permutation(n: usize, seed: u64, feature: usize, repeat: usize) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive_indexed(
        seed::derive_indexed(seed, "permutation", feature as u64),
        "repeat",
        repeat as u64,
    ));
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Number of correct predictions, optionally with column `j` taken from row `perm[i]`.
fn accuracy(model: &TrainedModel, x: &FeatureMatrix, y: &[u8], swap: Option<(usize, &[usize])>) -> f64 {
    let mut buf = vec![0.0; x.n_cols()];
    let mut hits = 0usize;
    for (i, row) in x.rows().enumerate() {
        let pred = match swap {
            None => model.predict_class_row(row),
            Some((j, perm)) => {
                buf.copy_from_slice(row);
                buf[j] = x.get(perm[i], j);
                model.predict_class_row(&buf)
            }
        };
        hits += usize::from(pred == y[i]);
    }
    hits as f64
}

/// Reuses the test-to-train distance matrix: shuffling column j changes
/// one squared term per pair. Matches the generic path exactly when the
/// data are integers; otherwise up to rounding in the distances.
fn permutation_knn(knn: &KnnModel, x: &FeatureMatrix, y: &[u8], repeats: usize, seed: u64) -> Vec<f64> {
    let n = x.n_rows();
    let m = knn.n_stored();
    let labels = knn.stored_labels();
    let mut dist = vec![0.0; n * m];
    for (i, row) in x.rows().enumerate() {
        for t in 0..m {
            dist[i * m + t] = knn.sq_dist(t, row);
        }
    }
    let mut cands: Vec<Neighbor> = Vec::with_capacity(m);
    let mut base = 0usize;
    for i in 0..n {
        cands.clear();
        cands.extend((0..m).map(|t| (dist[i * m + t], t)));
        base += usize::from(vote_label(select_k(&mut cands, knn.k()), labels) == y[i]);
    }
    (0..x.n_cols())
        .map(|j| {
            let mut sum = 0usize;
            for r in 0..repeats {
                let perm = permutation(n, seed, j, r);
                for i in 0..n {
                    let old = x.get(i, j);
                    let new = x.get(perm[i], j);
                    cands.clear();
                    if old == new {
                        cands.extend((0..m).map(|t| (dist[i * m + t], t)));
                    } else {
                        for t in 0..m {
                            let s = knn.stored_row(t)[j];
                            let d = dist[i * m + t] - (old - s) * (old - s) + (new - s) * (new - s);
                            cands.push((d.max(0.0), t));
                        }
                    }
                    sum += usize::from(vote_label(select_k(&mut cands, knn.k()), labels) == y[i]);
                }
            }
            (base as f64 - sum as f64 / repeats as f64) / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_knn, DecisionTree, GbtModel, GbtParams, Node};
    use proptest::prelude::*;

    fn generic_knn(model: &TrainedModel, x: &FeatureMatrix, y: &[u8], repeats: usize, seed: u64) -> Vec<f64> {
        let n = x.n_rows() as f64;
        let base = accuracy(model, x, y, None);
        (0..x.n_cols())
            .map(|j| {
                let sum: f64 = (0..repeats)
                    .map(|r| accuracy(model, x, y, Some((j, &permutation(x.n_rows(), seed, j, r)))))
                    .sum();
                (base - sum / repeats as f64) / n
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn knn_fast_path_matches_generic_on_integer_data(
            rows in prop::collection::vec(prop::collection::vec(-4i32..5, 3), 12..30),
            flips in prop::collection::vec(any::<bool>(), 30),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let x = FeatureMatrix::from_rows_anonymous(&rows, 3).unwrap();
            let ids: Vec<u32> = (0..rows.len()).map(|i| u32::from(flips[i])).collect();
            let y = LabelVector::binary(ids).unwrap();
            let model = TrainedModel::Knn(train_knn(&x, &y, k.min(rows.len())).unwrap());
            let fast = importance_permutation(&model, &x, &y, 2, seed).unwrap();
            let slow = generic_knn(&model, &x, &y.as_binary().unwrap(), 2, seed);
            prop_assert_eq!(fast.scores, slow);
        }
    }

    #[test]
    fn gain_sums_to_one_and_unused_is_zero() {
        let t = DecisionTree::from_nodes(vec![
            Node::Split { feature: 2, threshold: 0.0, left: 1, right: 2, gain: 3.0, cover: 4.0 },
            Node::Leaf { value: -1.0, cover: 2.0 },
            Node::Split { feature: 0, threshold: 1.0, left: 3, right: 4, gain: 1.0, cover: 2.0 },
            Node::Leaf { value: 0.5, cover: 1.0 },
            Node::Leaf { value: 1.0, cover: 1.0 },
        ])
        .unwrap();
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        let m = TrainedModel::Gbt(GbtModel::from_parts(names, vec![t], 0.3, 0.0, GbtParams::default()).unwrap());
        let g = importance_gain(&m).unwrap();
        assert_eq!(g.scores, vec![0.25, 0.0, 0.75]);
        assert_eq!(g.ranking(), vec![2, 0, 1]);
        assert_eq!(g.rank_of("b"), Some(3));
    }
}
