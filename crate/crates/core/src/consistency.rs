//! Agreement between importance sources: global ranking overlap and
//! per-instance SHAP/LIME cross-checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::explain::{default_method, explain_instance, lime_explain, LimeExplanation, LimeParams, ShapValues};
use crate::models::{ImportanceMethod, ImportanceVector, Model, TrainedModel};
use crate::seed;

pub const DEFAULT_TOP_KS: [usize; 3] = [2, 5, 10];

/// An importance vector with a display label ("gbt_gain", "shap", ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSource {
    pub label: String,
    pub importance: ImportanceVector,
}

impl RankingSource {
    pub fn new(label: impl Into<String>, importance: ImportanceVector) -> Self {
        Self {
            label: label.into(),
            importance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRanking {
    pub label: String,
    pub method: ImportanceMethod,
    /// Feature names by descending score.
    pub ranking: Vec<String>,
    /// Scores in `ranking` order.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKOverlap {
    pub k: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub top_k: Vec<TopKOverlap>,
    /// Kendall tau-b over all features; `None` when either source has a
    /// single distinct score.
    pub kendall_tau_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub k: usize,
    /// Features in every source's top-k, by ascending feature index.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingComparison {
    pub sources: Vec<SourceRanking>,
    pub pairs: Vec<PairwiseComparison>,
    pub consensus: Vec<Consensus>,
}

impl RankingComparison {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairwiseComparison> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

impl PairwiseComparison {
    pub fn jaccard(&self, k: usize) -> Option<f64> {
        self.top_k.iter().find(|t| t.k == k).map(|t| t.jaccard)
    }
}

pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let inter = a.iter().filter(|i| b.contains(i)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Kendall tau-b between two score vectors; `None` if either is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tie_x += 1,
                (_, 0) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant) as f64;
    let denom = ((n0 + tie_x as f64) * (n0 + tie_y as f64)).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Compares every pair of sources at each `k` in `ks` (clamped to the
/// feature count). Pairwise values depend only on the two sources involved.
pub fn compare_rankings(sources: &[RankingSource], ks: &[usize]) -> Result<RankingComparison> {
    if sources.len() < 2 {
        return Err(Error::Parameter("ranking comparison needs at least two sources".into()));
    }
    let names = &sources[0].importance.feature_names;
    if let Some(bad) = sources.iter().find(|s| &s.importance.feature_names != names) {
        return Err(Error::Schema(format!("source `{}` has a different feature list", bad.label)));
    }
    let p = names.len();
    let ks: Vec<usize> = ks.iter().map(|&k| k.min(p)).collect();
    let rankings: Vec<Vec<usize>> = sources.iter().map(|s| s.importance.ranking()).collect();
    let summaries = sources
        .iter()
        .zip(&rankings)
        .map(|(s, r)| SourceRanking {
            label: s.label.clone(),
            method: s.importance.method,
            ranking: r.iter().map(|&j| names[j].clone()).collect(),
            scores: r.iter().map(|&j| s.importance.scores[j]).collect(),
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..sources.len() {
        for b in a + 1..sources.len() {
            pairs.push(PairwiseComparison {
                a: sources[a].label.clone(),
                b: sources[b].label.clone(),
                top_k: ks
                    .iter()
                    .map(|&k| TopKOverlap {
                        k,
                        jaccard: jaccard(&rankings[a][..k], &rankings[b][..k]),
                    })
                    .collect(),
                kendall_tau_b: kendall_tau_b(&sources[a].importance.scores, &sources[b].importance.scores),
            });
        }
    }
    let consensus = ks
        .iter()
        .map(|&k| Consensus {
            k,
            features: (0..p)
                .filter(|j| rankings.iter().all(|r| r[..k].contains(j)))
                .map(|j| names[j].clone())
                .collect(),
        })
        .collect();
    Ok(RankingComparison {
        sources: summaries,
        pairs,
        consensus,
    })
}

/// Mean `|weight|` per feature over a set of LIME explanations (features
/// not selected for an instance count as 0).
pub fn lime_global(explanations: &[LimeExplanation], feature_names: Vec<String>) -> Result<ImportanceVector> {
    if explanations.is_empty() {
        return Err(Error::EmptyInput("no LIME explanations to aggregate".into()));
    }
    let p = feature_names.len();
    let mut scores = vec![0.0; p];
    for e in explanations {
        for f in &e.features {
            if f.index >= p {
                return Err(Error::Schema(format!("LIME feature index {} out of range", f.index)));
            }
            scores[f.index] += f.weight.abs();
        }
    }
    for s in &mut scores {
        *s /= explanations.len() as f64;
    }
    ImportanceVector::new(ImportanceMethod::LimeGlobal, feature_names, scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAgreement {
    pub instance_hash: u64,
    pub model_class: u8,
    pub shap_class: u8,
    pub lime_class: u8,
    pub shap_matches_model: bool,
    pub lime_matches_model: bool,
    pub shap_matches_lime: bool,
    pub k: usize,
    /// `|top-k |phi| ∩ top-k |weight|| / k`.
    pub overlap: f64,
    /// Share of shared top-k features with the same sign; `None` if the
    /// top-k sets are disjoint.
    pub sign_agreement: Option<f64>,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Cross-checks SHAP and LIME explanations of the same instance `x`.
pub fn cross_validate_local(
    model: &dyn Model,
    x: &[f64],
    shap: &ShapValues,
    lime: &LimeExplanation,
    k: usize,
) -> Result<LocalAgreement> {
    let h = seed::row_hash(x);
    if shap.instance_hash != h || lime.instance_hash != h {
        return Err(Error::InstanceMismatch);
    }
    let p = shap.phi.len();
    if k == 0 || k > p {
        return Err(Error::Parameter(format!("top-k = {k} must be in 1..={p}")));
    }
    let shap_top: Vec<usize> = shap.ranking().into_iter().take(k).collect();
    let lime_top: Vec<usize> = lime.features.iter().take(k).map(|f| f.index).collect();
    let lime_w = lime.dense_weights(p);
    let shared: Vec<usize> = shap_top.iter().copied().filter(|j| lime_top.contains(j)).collect();
    let sign_agreement = (!shared.is_empty()).then(|| {
        shared.iter().filter(|&&j| sign(shap.phi[j]) == sign(lime_w[j])).count() as f64 / shared.len() as f64
    });
    let model_class = model.predict_class_row(x);
    let shap_class = shap.implied_class();
    let lime_class = lime.implied_class();
    Ok(LocalAgreement {
        instance_hash: h,
        model_class,
        shap_class,
        lime_class,
        shap_matches_model: shap_class == model_class,
        lime_matches_model: lime_class == model_class,
        shap_matches_lime: shap_class == lime_class,
        k,
        overlap: shared.len() as f64 / k as f64,
        sign_agreement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgreementConfig {
    /// Top-k for per-instance overlap.
    pub local_k: usize,
    pub ranking_ks: Vec<usize>,
    /// Permutations for the sampling explainer (KNN only).
    pub n_permutations: usize,
    pub lime: LimeParams,
    pub seed: u64,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self {
            local_k: 5,
            ranking_ks: DEFAULT_TOP_KS.to_vec(),
            n_permutations: 200,
            lime: LimeParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    /// Caller-supplied row id (e.g. test-set index).
    pub row: usize,
    pub agreement: LocalAgreement,
    pub shap_top: Vec<String>,
    pub lime_top: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub n_samples: usize,
    pub shap_model_rate: Option<f64>,
    pub lime_model_rate: Option<f64>,
    pub shap_lime_rate: Option<f64>,
    pub mean_overlap: Option<f64>,
    pub mean_sign_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub model: String,
    pub samples: Vec<SampleVerdict>,
    pub summary: AgreementSummary,
    /// Present when at least two ranking sources are available.
    pub rankings: Option<RankingComparison>,
}

impl AgreementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Explains every row of `samples` with SHAP and LIME, cross-checks them,
/// and compares `sources` plus the aggregated LIME ranking.
/// `rows[i]` is the id reported for sample `i`.
pub fn agreement_report(
    model: &TrainedModel,
    samples: &FeatureMatrix,
    rows: &[usize],
    background: &FeatureMatrix,
    sources: Vec<RankingSource>,
    config: &AgreementConfig,
) -> Result<AgreementReport> {
    if rows.len() != samples.n_rows() {
        return Err(Error::Parameter("one row id per sample is required".into()));
    }
    let names = model.feature_names();
    let method = default_method(model, config.n_permutations, seed::derive(config.seed, "shap"));
    let lime_master = seed::derive(config.seed, "lime");
    let results: Vec<(LocalAgreement, ShapValues, LimeExplanation)> = (0..samples.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = samples.row(i);
            let shap = explain_instance(model, x, background, method, i as u64)?;
            let params = LimeParams {
                seed: seed::derive_indexed(lime_master, "lime-instance", i as u64),
                ..config.lime.clone()
            };
            let lime = lime_explain(model, x, None, &params)?;
            let agreement = cross_validate_local(model, x, &shap, &lime, config.local_k.min(names.len()))?;
            Ok((agreement, shap, lime))
        })
        .collect::<Result<_>>()?;

    let verdicts: Vec<SampleVerdict> = results
        .iter()
        .zip(rows)
        .map(|((a, s, l), &row)| SampleVerdict {
            row,
            agreement: a.clone(),
            shap_top: s.ranking().iter().take(a.k).map(|&j| names[j].clone()).collect(),
            lime_top: l.features.iter().take(a.k).map(|f| names[f.index].clone()).collect(),
        })
        .collect();
    let rate = |f: fn(&LocalAgreement) -> bool| mean(verdicts.iter().map(|v| f64::from(u8::from(f(&v.agreement)))));
    let summary = AgreementSummary {
        n_samples: verdicts.len(),
        shap_model_rate: rate(|a| a.shap_matches_model),
        lime_model_rate: rate(|a| a.lime_matches_model),
        shap_lime_rate: rate(|a| a.shap_matches_lime),
        mean_overlap: mean(verdicts.iter().map(|v| v.agreement.overlap)),
        mean_sign_agreement: mean(verdicts.iter().filter_map(|v| v.agreement.sign_agreement)),
    };

    let mut sources = sources;
    if !results.is_empty() {
        let limes: Vec<LimeExplanation> = results.into_iter().map(|(_, _, l)| l).collect();
        sources.push(RankingSource::new("lime", lime_global(&limes, names.to_vec())?));
    }
    let rankings = if sources.len() >= 2 {
        Some(compare_rankings(&sources, &config.ranking_ks)?)
    } else {
        None
    };
    Ok(AgreementReport {
        model: model.kind().name().to_string(),
        samples: verdicts,
        summary,
        rankings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OutputSpace;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    fn src(label: &str, scores: Vec<f64>) -> RankingSource {
        let p = scores.len();
        RankingSource::new(label, ImportanceVector::new(ImportanceMethod::Gain, names(p), scores).unwrap())
    }

    #[test]
    fn top2_overlap_of_one_shared_feature_is_a_third() {
        // a: {f0, f1}, b: {f1, f2}
        let c = compare_rankings(&[src("a", vec![0.5, 0.4, 0.1, 0.0]), src("b", vec![0.1, 0.5, 0.4, 0.0])], &[2]).unwrap();
        assert!((c.pairs[0].jaccard(2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.consensus[0].features, vec!["f1".to_string()]);
    }

    #[test]
    fn identity_and_symmetry() {
        let a = src("a", vec![0.3, 0.1, 0.6, 0.0, 0.2]);
        let b = src("b", vec![0.1, 0.3, 0.5, 0.2, 0.0]);
        let c = compare_rankings(&[a.clone(), a.clone()], &DEFAULT_TOP_KS).unwrap();
        assert!(c.pairs[0].top_k.iter().all(|t| t.jaccard == 1.0));
        assert_eq!(c.pairs[0].kendall_tau_b, Some(1.0));
        let ab = compare_rankings(&[a.clone(), b.clone()], &DEFAULT_TOP_KS).unwrap();
        let ba = compare_rankings(&[b, a], &DEFAULT_TOP_KS).unwrap();
        assert_eq!(ab.pairs[0].top_k, ba.pairs[0].top_k);
        assert_eq!(ab.pairs[0].kendall_tau_b, ba.pairs[0].kendall_tau_b);
        // k clamps to the feature count
        assert_eq!(ab.pairs[0].top_k[2].k, 5);
    }

    #[test]
    fn kendall_matches_hand_count() {
        // pairs: (0,1) C, (0,2) C, (1,2) D -> (2-1)/3
        assert!((kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(kendall_tau_b(&[1.0, 1.0], &[1.0, 2.0]), None);
        // one tie in x: n0 = 2, tie_x = 1 -> 2 / sqrt(2 * 3)
        let t = kendall_tau_b(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((t - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schema_mismatch_and_single_source_are_errors() {
        let a = src("a", vec![0.1, 0.2]);
        let b = src("b", vec![0.1, 0.2, 0.3]);
        assert!(matches!(compare_rankings(&[a.clone(), b], &[2]), Err(Error::Schema(_))));
        assert!(compare_rankings(&[a], &[2]).is_err());
    }

    fn shap_for(x: &[f64], phi: Vec<f64>) -> ShapValues {
        ShapValues {
            phi,
            base_value: 0.0,
            output: 0.0,
            output_space: OutputSpace::Margin,
            probability_base: 0.5,
            std_errors: None,
            instance_hash: seed::row_hash(x),
        }
    }

    fn lime_for(x: &[f64], weights: &[f64], local: f64) -> LimeExplanation {
        let mut features: Vec<crate::explain::LimeFeature> = weights
            .iter()
            .enumerate()
            .map(|(index, &weight)| crate::explain::LimeFeature { index, value: x[index], weight })
            .collect();
        features.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
        LimeExplanation {
            features,
            intercept: 0.0,
            local_prediction: local,
            probabilities: [0.5, 0.5],
            kernel_width: 1.0,
            n_samples: 10,
            seed: 0,
            score: 1.0,
            instance_hash: seed::row_hash(x),
        }
    }

    #[test]
    fn identical_attributions_agree_fully() {
        let m = crate::models::FnModel::new(3, |_| 0.2);
        let x = [1.0, 2.0, 3.0];
        let phi = vec![-0.3, 0.1, -0.05];
        let a = cross_validate_local(&m, &x, &shap_for(&x, phi.clone()), &lime_for(&x, &phi, 0.2), 2).unwrap();
        assert_eq!((a.model_class, a.shap_class, a.lime_class), (0, 0, 0));
        assert!(a.shap_matches_model && a.lime_matches_model && a.shap_matches_lime);
        assert_eq!(a.overlap, 1.0);
        assert_eq!(a.sign_agreement, Some(1.0));
    }

    #[test]
    fn different_instances_are_rejected() {
        let m = crate::models::FnModel::new(2, |_| 0.2);
        let s = shap_for(&[1.0, 2.0], vec![0.0, 0.0]);
        let l = lime_for(&[1.0, 2.5], &[0.0, 0.0], 0.2);
        assert!(matches!(cross_validate_local(&m, &[1.0, 2.0], &s, &l, 1), Err(Error::InstanceMismatch)));
    }
}
