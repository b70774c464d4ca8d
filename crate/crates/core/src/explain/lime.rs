use rand_distr::StandardNormal;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimeParams {
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(p)`.
    pub kernel_width: Option<f64>,
    /// Number of features kept in the surrogate.
    pub k: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeParams {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            k: 10,
            ridge: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeFeature {
    pub index: usize,
    /// Instance value of the feature.
    pub value: f64,
    pub weight: f64,
}

impl LimeFeature {
    /// Surrogate contribution at the instance: `weight * value`.
    pub fn contribution(&self) -> f64 {
        self.weight * self.value
    }
}

/// Weighted linear surrogate `intercept + sum(weight_j * x_j)` of the
/// class-1 probability around one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    /// Selected features by descending `|weight|`, ties to the lower index.
    pub features: Vec<LimeFeature>,
    pub intercept: f64,
    /// Surrogate value at the instance.
    pub local_prediction: f64,
    /// Model probabilities `[P(class 0), P(class 1)]` at the instance.
    pub probabilities: [f64; 2],
    pub kernel_width: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Weighted R^2 of the surrogate on the perturbation sample.
    pub score: f64,
    pub instance_hash: u64,
}

impl LimeExplanation {
    pub fn implied_class(&self) -> u8 {
        u8::from(self.local_prediction > 0.5)
    }

    /// Dense weight vector over `p` features (unselected = 0).
    pub fn dense_weights(&self, p: usize) -> Vec<f64> {
        let mut w = vec![0.0; p];
        for f in &self.features {
            w[f.index] = f.weight;
        }
        w
    }
}

/// Solves `a x = b` for symmetric positive definite `a` (n x n, row-major)
/// by Cholesky; `None` if `a` is not positive definite.
fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// Weighted, centered second moments of the perturbation sample.
struct Moments {
    p: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
    syy: f64,
    x_mean: Vec<f64>,
    y_mean: f64,
}

impl Moments {
    /// Ridge fit on `subset`: returns coefficients and weighted SSE.
    fn fit(&self, subset: &[usize], ridge: f64) -> (Vec<f64>, f64) {
        let m = subset.len();
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for (r, &i) in subset.iter().enumerate() {
            b[r] = self.cross[i];
            for (c, &j) in subset.iter().enumerate() {
                a[r * m + c] = self.gram[i * self.p + j];
            }
            a[r * m + r] += ridge;
        }
        let beta = solve_spd(&a, &b).unwrap_or_else(|| vec![0.0; m]);
        let mut sse = self.syy;
        for r in 0..m {
            sse -= 2.0 * beta[r] * b[r];
            for c in 0..m {
                sse += beta[r] * beta[c] * (a[r * m + c] - if r == c { ridge } else { 0.0 });
            }
        }
        (beta, sse.max(0.0))
    }
}

/// LIME around `x`: Gaussian perturbations with per-feature `scale` (unit
/// when `None`, matching standardized data), kernel weights
/// `exp(-d^2 / w^2)` on the scaled distance, weighted ridge regression of
/// the model probability, and forward selection of `k` features by
/// weighted R^2 followed by a refit on the selection.
pub fn lime_explain(model: &dyn Model, x: &[f64], scale: Option<&[f64]>, params: &LimeParams) -> Result<LimeExplanation> {
    let p = x.len();
    if p != model.n_features() {
        return Err(Error::Schema(format!("model has {} features, instance {p}", model.n_features())));
    }
    if params.k == 0 || params.k > p {
        return Err(Error::Parameter(format!("lime k = {} must be in 1..={p}", params.k)));
    }
    if params.n_samples < params.k + 1 {
        return Err(Error::Parameter(format!(
            "lime needs at least k + 1 = {} samples",
            params.k + 1
        )));
    }
    if !(params.ridge >= 0.0) {
        return Err(Error::Parameter("ridge penalty must be >= 0".into()));
    }
    let unit = vec![1.0; p];
    let scale = scale.unwrap_or(&unit);
    if scale.len() != p || scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Parameter("lime scale must be p finite non-negative values".into()));
    }
    let width = params.kernel_width.unwrap_or(0.75 * (p as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::KernelWidth { width });
    }

    let mut rng = seed::rng(params.seed);
    let n = params.n_samples;
    let mut z = vec![0.0; n * p];
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    for s in 0..n {
        let row = &mut z[s * p..(s + 1) * p];
        let mut d2 = 0.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            row[j] = x[j] + scale[j] * e;
            if scale[j] > 0.0 {
                d2 += e * e;
            }
        }
        w[s] = (-d2 / (width * width)).exp();
        y[s] = model.predict_proba_row(row);
    }
    let w_sum: f64 = w.iter().sum();
    if !(w_sum > 1e-12 * n as f64) {
        return Err(Error::KernelWidth { width });
    }

    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for s in 0..n {
        for j in 0..p {
            x_mean[j] += w[s] * z[s * p + j];
        }
        y_mean += w[s] * y[s];
    }
    for v in &mut x_mean {
        *v /= w_sum;
    }
    y_mean /= w_sum;
    let mut gram = vec![0.0; p * p];
    let mut cross = vec![0.0; p];
    let mut syy = 0.0;
    let mut c = vec![0.0; p];
    for s in 0..n {
        for j in 0..p {
            c[j] = z[s * p + j] - x_mean[j];
        }
        let yc = y[s] - y_mean;
        syy += w[s] * yc * yc;
        for i in 0..p {
            let wi = w[s] * c[i];
            cross[i] += wi * yc;
            for j in i..p {
                gram[i * p + j] += wi * c[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[i * p + j] = gram[j * p + i];
        }
    }
    let mom = Moments {
        p,
        gram,
        cross,
        syy,
        x_mean,
        y_mean,
    };

    let mut selected: Vec<usize> = Vec::with_capacity(params.k);
    for _ in 0..params.k {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|j| !selected.contains(j)) {
            let mut trial = selected.clone();
            trial.push(j);
            let (_, sse) = mom.fit(&trial, params.ridge);
            if best.is_none_or(|(_, b)| sse < b) {
                best = Some((j, sse));
            }
        }
        selected.push(best.expect("k <= p leaves a candidate").0);
    }
    let (beta, sse) = mom.fit(&selected, params.ridge);
    let intercept = mom.y_mean - selected.iter().zip(&beta).map(|(&j, b)| b * mom.x_mean[j]).sum::<f64>();
    let local_prediction = intercept + selected.iter().zip(&beta).map(|(&j, b)| b * x[j]).sum::<f64>();
    let mut features: Vec<LimeFeature> = selected
        .iter()
        .zip(&beta)
        .map(|(&index, &weight)| LimeFeature {
            index,
            value: x[index],
            weight,
        })
        .collect();
    features.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.index.cmp(&b.index)));
    let p1 = model.predict_proba_row(x);
    Ok(LimeExplanation {
        features,
        intercept,
        local_prediction,
        probabilities: [1.0 - p1, p1],
        kernel_width: width,
        n_samples: n,
        seed: params.seed,
        score: if mom.syy > 0.0 { 1.0 - sse / mom.syy } else { 0.0 },
        instance_hash: seed::row_hash(x),
    })
}
