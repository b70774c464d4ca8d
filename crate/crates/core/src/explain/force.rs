use serde::{Deserialize, Serialize};

use super::ShapValues;
use crate::error::{Error, Result};

/// Sign convention for force plots.
pub const FORCE_DIRECTION: &str = "positive pushes toward attack (class 1)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceEntry {
    pub index: usize,
    pub name: String,
    pub value: f64,
    pub phi: f64,
    /// Running output after adding this feature.
    pub cumulative: f64,
}

/// Additive path from the base value to the model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    pub base: f64,
    pub output: f64,
    pub direction: String,
    /// Features by descending `phi`: pushes up first, pushes down last.
    pub entries: Vec<ForceEntry>,
    /// `base` followed by every entry's `cumulative`.
    pub trajectory: Vec<f64>,
}

pub fn force_breakdown(shap: &ShapValues, names: &[String], x: &[f64]) -> Result<ForceBreakdown> {
    let p = shap.phi.len();
    if names.len() != p || x.len() != p {
        return Err(Error::Schema(format!(
            "{p} attributions, {} names, {} values",
            names.len(),
            x.len()
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| shap.phi[b].total_cmp(&shap.phi[a]).then(a.cmp(&b)));
    let mut acc = shap.base_value;
    let mut trajectory = Vec::with_capacity(p + 1);
    trajectory.push(acc);
    let entries = order
        .into_iter()
        .map(|j| {
            acc += shap.phi[j];
            trajectory.push(acc);
            ForceEntry {
                index: j,
                name: names[j].clone(),
                value: x[j],
                phi: shap.phi[j],
                cumulative: acc,
            }
        })
        .collect();
    Ok(ForceBreakdown {
        base: shap.base_value,
        output: shap.output,
        direction: FORCE_DIRECTION.to_string(),
        entries,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OutputSpace;

    #[test]
    fn trajectory_runs_from_base_to_output() {
        let shap = ShapValues {
            phi: vec![-0.1, 0.3],
            base_value: 0.49,
            output: 0.69,
            output_space: OutputSpace::Probability,
            probability_base: 0.49,
            std_errors: None,
            instance_hash: 0,
        };
        let names = vec!["a".to_string(), "b".to_string()];
        let f = force_breakdown(&shap, &names, &[1.0, 2.0]).unwrap();
        assert_eq!(f.entries[0].name, "b");
        let expect = [0.49, 0.79, 0.69];
        for (t, e) in f.trajectory.iter().zip(expect) {
            assert!((t - e).abs() < 1e-12);
        }
        assert!((f.trajectory.last().unwrap() - f.output).abs() < 1e-12);
        assert!(force_breakdown(&shap, &names[..1], &[1.0, 2.0]).is_err());
    }
}
