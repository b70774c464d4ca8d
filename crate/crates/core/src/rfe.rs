//! Recursive feature elimination: retrain on shrinking feature sets and
//! keep a set only while the held-out score does not degrade.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::explain::{default_method, sample_background, shap_global};
use crate::models::{importance_gain, importance_permutation, ImportanceVector, TrainedModel};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceSource {
    Gain,
    Permutation,
    ShapGlobal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfeConfig {
    pub min_features: usize,
    /// Allowed score drop per accepted step.
    pub tolerance: f64,
    /// Drop every zero-importance feature in one step before the loop.
    pub batch_drop_zero: bool,
    pub importance_source: ImportanceSource,
    /// Top-m per source for the XAI-guided starting set.
    pub xai_top_m: usize,
    /// Rows of the scoring set explained when `importance_source` is SHAP.
    pub shap_rows: usize,
    pub shap_background: usize,
    pub permutation_repeats: usize,
    pub seed: u64,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            min_features: 5,
            tolerance: 0.0,
            batch_drop_zero: true,
            importance_source: ImportanceSource::Gain,
            xai_top_m: 20,
            shap_rows: 200,
            shap_background: 50,
            permutation_repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfeStep {
    Baseline,
    XaiSeed,
    ZeroImportance,
    Eliminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeIteration {
    pub iteration: usize,
    pub step: RfeStep,
    /// Candidate feature set (names, original column order).
    pub features: Vec<String>,
    pub removed: Vec<String>,
    pub score: f64,
    pub accepted: bool,
    /// Score the candidate had to reach.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeTrace {
    pub tolerance: f64,
    pub baseline_score: f64,
    pub iterations: Vec<RfeIteration>,
    /// Index into `iterations` of the best accepted set.
    pub best_iteration: usize,
    pub best_features: Vec<String>,
    pub best_score: f64,
}

impl RfeTrace {
    /// Re-checks the acceptance rule from the recorded scores alone.
    pub fn acceptance_holds(&self) -> bool {
        let mut prev = self.baseline_score;
        for it in self.iterations.iter().skip(1) {
            let ok = it.score >= prev - self.tolerance;
            if it.accepted != ok {
                return false;
            }
            if it.accepted {
                prev = it.score;
            }
        }
        true
    }
}

/// Kept column indices after removing every zero-gain feature.
pub fn drop_zero_importance(model: &TrainedModel) -> Result<Vec<usize>> {
    let gain = importance_gain(model)?;
    Ok((0..gain.len()).filter(|&j| gain.scores[j] != 0.0).collect())
}

/// Union of each source's top-m features, as ascending column indices.
pub fn xai_guided_seed(sources: &[&ImportanceVector], m: usize) -> Result<Vec<usize>> {
    let first = sources
        .first()
        .ok_or_else(|| Error::Parameter("xai seed needs at least one source".into()))?;
    if sources.iter().any(|s| s.feature_names != first.feature_names) {
        return Err(Error::Schema("importance sources disagree on the feature list".into()));
    }
    let set: BTreeSet<usize> = sources.iter().flat_map(|s| s.top(m)).collect();
    Ok(set.into_iter().collect())
}

pub type Trainer<'a> = dyn Fn(&FeatureMatrix, &LabelVector) -> Result<TrainedModel> + Sync + 'a;

struct Ctx<'a> {
    trainer: &'a Trainer<'a>,
    fit: (&'a FeatureMatrix, &'a LabelVector),
    score: (&'a FeatureMatrix, &'a LabelVector),
    config: &'a RfeConfig,
}

impl Ctx<'_> {
    fn train(&self, cols: &[usize], iteration: usize) -> Result<(TrainedModel, f64)> {
        let wrap = |e| Error::Rfe {
            iteration,
            source: Box::new(e),
        };
        let model = (self.trainer)(&self.fit.0.select_columns(cols), self.fit.1).map_err(wrap)?;
        let score = model
            .evaluate(&self.score.0.select_columns(cols), self.score.1)
            .map_err(wrap)?
            .accuracy;
        Ok((model, score))
    }

    /// Importance over `cols`, aligned with `cols`.
    fn importance(&self, model: &TrainedModel, cols: &[usize], iteration: usize) -> Result<Vec<f64>> {
        let s = seed::derive_indexed(self.config.seed, "rfe-importance", iteration as u64);
        let x = self.score.0.select_columns(cols);
        let v = match self.config.importance_source {
            ImportanceSource::Gain => importance_gain(model),
            ImportanceSource::Permutation => {
                importance_permutation(model, &x, self.score.1, self.config.permutation_repeats, s)
            }
            ImportanceSource::ShapGlobal => {
                let bg = sample_background(&self.fit.0.select_columns(cols), self.config.shap_background, s);
                let rows: Vec<usize> = (0..x.n_rows().min(self.config.shap_rows)).collect();
                let method = default_method(model, 100, s);
                shap_global(model, &x.select_rows(&rows), &bg, method, 0.0).map(|(g, _)| g.to_importance())
            }
        };
        v.map(|v| v.scores).map_err(|e| Error::Rfe {
            iteration,
            source: Box::new(e),
        })
    }
}

/// Runs elimination starting from all columns of `fit.0`.
///
/// Step order: baseline on all features; the optional `initial` set (an
/// XAI-guided seed); the optional zero-importance batch; then one
/// argmin-importance removal per iteration (ties to the lowest column).
/// Each candidate is accepted iff its score is at least the last accepted
/// score minus `tolerance`. A rejected batch step keeps the previous set
/// and moves on; a rejected single removal ends the loop, as does reaching
/// `min_features`. The best set is the accepted one with the highest score,
/// preferring later (smaller) sets on ties; its model is returned.
pub fn rfe_run(
    trainer: &Trainer<'_>,
    fit: (&FeatureMatrix, &LabelVector),
    score: (&FeatureMatrix, &LabelVector),
    initial: Option<&[usize]>,
    config: &RfeConfig,
) -> Result<(RfeTrace, TrainedModel)> {
    let p = fit.0.n_cols();
    if config.min_features == 0 || config.min_features > p {
        return Err(Error::Parameter(format!("min_features = {} must be in 1..={p}", config.min_features)));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::Parameter("rfe tolerance must be >= 0".into()));
    }
    if score.0.schema().names() != fit.0.schema().names() {
        return Err(Error::Schema("scoring set columns differ from the training set".into()));
    }
    let names = fit.0.schema().names();
    let ctx = Ctx {
        trainer,
        fit,
        score,
        config,
    };
    let to_names = |cols: &[usize]| cols.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();

    let mut current: Vec<usize> = (0..p).collect();
    let (mut model, baseline) = ctx.train(&current, 0)?;
    let mut prev = baseline;
    let mut iterations = vec![RfeIteration {
        iteration: 0,
        step: RfeStep::Baseline,
        features: to_names(&current),
        removed: Vec::new(),
        score: baseline,
        accepted: true,
        threshold: None,
    }];
    let mut best = (0usize, baseline, current.clone(), model.clone());

    // Candidate evaluation shared by every step; returns whether accepted.
    let mut attempt = |step: RfeStep,
                       candidate: Vec<usize>,
                       current: &mut Vec<usize>,
                       model: &mut TrainedModel,
                       prev: &mut f64,
                       iterations: &mut Vec<RfeIteration>|
     -> Result<bool> {
        let iteration = iterations.len();
        let (m, s) = ctx.train(&candidate, iteration)?;
        let threshold = *prev - config.tolerance;
        let accepted = s >= threshold;
        iterations.push(RfeIteration {
            iteration,
            step,
            features: to_names(&candidate),
            removed: to_names(&current.iter().copied().filter(|j| !candidate.contains(j)).collect::<Vec<_>>()),
            score: s,
            accepted,
            threshold: Some(threshold),
        });
        if accepted {
            if s >= best.1 {
                best = (iteration, s, candidate.clone(), m.clone());
            }
            *current = candidate;
            *model = m;
            *prev = s;
        }
        Ok(accepted)
    };

    if let Some(init) = initial {
        let mut cand: Vec<usize> = init.iter().copied().filter(|&j| j < p).collect::<BTreeSet<_>>().into_iter().collect();
        if cand.len() < config.min_features {
            // pad with the lowest-index remaining columns
            for j in 0..p {
                if cand.len() >= config.min_features {
                    break;
                }
                if !cand.contains(&j) {
                    cand.push(j);
                }
            }
            cand.sort_unstable();
        }
        if cand.len() < current.len() {
            attempt(RfeStep::XaiSeed, cand, &mut current, &mut model, &mut prev, &mut iterations)?;
        }
    }

    if config.batch_drop_zero {
        let imp = ctx.importance(&model, &current, iterations.len())?;
        let mut zero: Vec<usize> = (0..current.len()).filter(|&i| imp[i] == 0.0).collect();
        zero.truncate(current.len().saturating_sub(config.min_features));
        if !zero.is_empty() {
            let cand: Vec<usize> = (0..current.len())
                .filter(|i| !zero.contains(i))
                .map(|i| current[i])
                .collect();
            attempt(RfeStep::ZeroImportance, cand, &mut current, &mut model, &mut prev, &mut iterations)?;
        }
    }

    while current.len() > config.min_features {
        let imp = ctx.importance(&model, &current, iterations.len())?;
        let drop = (0..current.len())
            .min_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(a.cmp(&b)))
            .expect("current set is non-empty");
        let cand: Vec<usize> = current.iter().copied().enumerate().filter(|&(i, _)| i != drop).map(|(_, j)| j).collect();
        if !attempt(RfeStep::Eliminate, cand, &mut current, &mut model, &mut prev, &mut iterations)? {
            break;
        }
    }

    let (best_iteration, best_score, best_cols, best_model) = best;
    Ok((
        RfeTrace {
            tolerance: config.tolerance,
            baseline_score: baseline,
            iterations,
            best_iteration,
            best_features: to_names(&best_cols),
            best_score,
        },
        best_model,
    ))
}

/// Column indices of `names` within `x`.
pub fn resolve_features(x: &FeatureMatrix, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            x.schema()
                .names()
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::Schema(format!("unknown feature `{n}`")))
        })
        .collect()
}
