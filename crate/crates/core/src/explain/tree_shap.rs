//! Interventional tree SHAP: for each (instance, background row) pair the
//! tree is walked once, branching only where the two rows disagree on a
//! split whose feature is not yet assigned to either side.

use super::{check_inputs, mean_probability, ShapValues};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{DecisionTree, Node, OutputSpace, TrainedModel};
use crate::seed;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    X,
    B,
}

struct Walk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    b: &'a [f64],
    side: Vec<Side>,
    on_x: Vec<usize>,
    on_b: Vec<usize>,
    /// Factorials up to the tree's depth.
    fact: &'a [f64],
    phi: &'a mut [f64],
}

impl Walk<'_> {
    fn go(&mut self, node: usize) {
        match self.tree.nodes()[node] {
            Node::Leaf { value, .. } => {
                let (nx, nb) = (self.on_x.len(), self.on_b.len());
                let total = self.fact[nx + nb];
                if nx > 0 {
                    let w = value * self.fact[nx - 1] * self.fact[nb] / total;
                    for &f in &self.on_x {
                        self.phi[f] += w;
                    }
                }
                if nb > 0 {
                    let w = value * self.fact[nx] * self.fact[nb - 1] / total;
                    for &f in &self.on_b {
                        self.phi[f] -= w;
                    }
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let x_next = if self.x[feature] <= threshold { left } else { right };
                let b_next = if self.b[feature] <= threshold { left } else { right };
                match self.side[feature] {
                    Side::X => self.go(x_next),
                    Side::B => self.go(b_next),
                    Side::Free if x_next == b_next => self.go(x_next),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.on_x.push(feature);
                        self.go(x_next);
                        self.on_x.pop();
                        self.side[feature] = Side::B;
                        self.on_b.push(feature);
                        self.go(b_next);
                        self.on_b.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Adds the attributions of `tree` for `x` against every background row,
/// averaged over the background, scaled by `scale`.
fn accumulate(tree: &DecisionTree, x: &[f64], background: &FeatureMatrix, scale: f64, phi: &mut [f64]) {
    let p = x.len();
    let fact = factorials(tree.depth().min(p));
    let mut local = vec![0.0; p];
    for b in background.rows() {
        let mut w = Walk {
            tree,
            x,
            b,
            side: vec![Side::Free; p],
            on_x: Vec::new(),
            on_b: Vec::new(),
            fact: &fact,
            phi: &mut local,
        };
        w.go(0);
    }
    let k = scale / background.n_rows() as f64;
    for (a, l) in phi.iter_mut().zip(&local) {
        *a += k * l;
    }
}

/// Exact interventional Shapley values for tree ensembles. Boosted models
/// are explained in margin space (trees summed with the learning rate),
/// forests in probability space (trees averaged).
pub fn shap_tree(model: &TrainedModel, x: &[f64], background: &FeatureMatrix) -> Result<ShapValues> {
    check_inputs(model, x, background)?;
    let p = x.len();
    let mut phi = vec![0.0; p];
    let n_bg = background.n_rows() as f64;
    let (base_value, output, space) = match model {
        TrainedModel::Gbt(m) => {
            for t in m.trees() {
                accumulate(t, x, background, m.learning_rate(), &mut phi);
            }
            let base = background.rows().map(|b| m.margin(b)).sum::<f64>() / n_bg;
            (base, m.margin(x), OutputSpace::Margin)
        }
        TrainedModel::Rf(m) => {
            let scale = 1.0 / m.trees().len() as f64;
            for t in m.trees() {
                accumulate(t, x, background, scale, &mut phi);
            }
            let base = background.rows().map(|b| m.proba(b)).sum::<f64>() / n_bg;
            (base, m.proba(x), OutputSpace::Probability)
        }
        TrainedModel::Knn(_) => {
            return Err(Error::MethodMismatch(
                "tree SHAP needs a tree model; use sampling for knn".into(),
            ))
        }
    };
    Ok(ShapValues {
        phi,
        base_value,
        output,
        output_space: space,
        probability_base: mean_probability(model, background),
        std_errors: None,
        instance_hash: seed::row_hash(x),
    })
}
