use super::{check_inputs, mean_probability, ShapValues};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{Model, OutputSpace};
use crate::seed;

pub const EXACT_MAX_FEATURES: usize = 15;

/// Background-averaged value of every coalition: `v[mask]` is the mean
/// output with features in `mask` taken from `x` and the rest from each
/// background row.
pub(crate) fn coalition_values(model: &dyn Model, x: &[f64], background: &FeatureMatrix, space: OutputSpace) -> Vec<f64> {
    let p = x.len();
    let mut buf = vec![0.0; p];
    let n_bg = background.n_rows() as f64;
    (0..1usize << p)
        .map(|mask| {
            let mut total = 0.0;
            for b in background.rows() {
                for j in 0..p {
                    buf[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
                }
                total += model.output_row(&buf, space);
            }
            total / n_bg
        })
        .collect()
}

/// Brute-force Shapley values over all `2^p` coalitions.
pub fn shap_exact(model: &dyn Model, x: &[f64], background: &FeatureMatrix, space: OutputSpace) -> Result<ShapValues> {
    check_inputs(model, x, background)?;
    let p = x.len();
    if p > EXACT_MAX_FEATURES {
        return Err(Error::Budget {
            features: p,
            max: EXACT_MAX_FEATURES,
        });
    }
    if !model.supports(space) {
        return Err(Error::MethodMismatch(format!("model has no {space:?} output")));
    }
    let v = coalition_values(model, x, background, space);
    // weight[s] = s! (p - s - 1)! / p!
    let mut weight = vec![0.0; p.max(1)];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut acc = 1.0 / p as f64;
        // 1 / (p * C(p-1, s))
        for t in 0..s {
            acc *= (t + 1) as f64 / (p - 1 - t) as f64;
        }
        *w = acc;
    }
    let mut phi = vec![0.0; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..1usize << p {
            if mask & bit == 0 {
                *phi_i += weight[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
            }
        }
    }
    Ok(ShapValues {
        phi,
        base_value: v[0],
        output: model.output_row(x, space),
        output_space: space,
        probability_base: mean_probability(model, background),
        std_errors: None,
        instance_hash: seed::row_hash(x),
    })
}
