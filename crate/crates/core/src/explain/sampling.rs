use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::{check_inputs, mean_probability, ShapValues};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{Model, OutputSpace};
use crate::seed;

/// Permutation-sampling Shapley estimate. Each permutation adds features
/// one at a time and credits each with the change in the background-
/// averaged output, so every permutation sums exactly to
/// `output - base`; the estimate is the mean over permutations and the
/// standard error is the per-feature spread over `sqrt(n)`.
pub fn shap_sampling(
    model: &dyn Model,
    x: &[f64],
    background: &FeatureMatrix,
    n_permutations: usize,
    seed: u64,
    space: OutputSpace,
) -> Result<ShapValues> {
    check_inputs(model, x, background)?;
    if n_permutations == 0 {
        return Err(Error::Parameter("sampling needs at least one permutation".into()));
    }
    if !model.supports(space) {
        return Err(Error::MethodMismatch(format!("model has no {space:?} output")));
    }
    let p = x.len();
    let n_bg = background.n_rows() as f64;
    let mut buf = vec![0.0; p];
    // Coalitions are keyed by their member set; permutations revisit many.
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut value = |members: &[u64]| -> f64 {
        if let Some(&v) = memo.get(members) {
            return v;
        }
        let mut total = 0.0;
        for b in background.rows() {
            for j in 0..p {
                buf[j] = if members[j / 64] >> (j % 64) & 1 == 1 { x[j] } else { b[j] };
            }
            total += model.output_row(&buf, space);
        }
        let v = total / n_bg;
        memo.insert(members.to_vec(), v);
        v
    };

    let words = p.div_ceil(64).max(1);
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..p).collect();
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    let empty = vec![0u64; words];
    let base = value(&empty);
    for _ in 0..n_permutations {
        order.shuffle(&mut rng);
        let mut members = empty.clone();
        let mut prev = base;
        for &j in &order {
            members[j / 64] |= 1 << (j % 64);
            let v = value(&members);
            let d = v - prev;
            sum[j] += d;
            sum_sq[j] += d * d;
            prev = v;
        }
    }
    let n = n_permutations as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_errors = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| {
            if n_permutations < 2 {
                return f64::INFINITY;
            }
            let mean = s / n;
            let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(ShapValues {
        phi,
        base_value: base,
        output: model.output_row(x, space),
        output_space: space,
        probability_base: mean_probability(model, background),
        std_errors: Some(std_errors),
        instance_hash: seed::row_hash(x),
    })
}
