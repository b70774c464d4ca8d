use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Brute-force Euclidean k-nearest-neighbor classifier over stored rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub(crate) feature_names: Vec<String>,
    pub(crate) data: Vec<f64>,
    pub(crate) labels: Vec<u8>,
    pub(crate) k: usize,
}

pub fn train_knn(x: &FeatureMatrix, y: &LabelVector, k: usize) -> Result<KnnModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Parameter("matrix and labels are not aligned".into()));
    }
    if k == 0 || k > x.n_rows() {
        return Err(Error::Parameter(format!(
            "knn k = {k} must be in 1..={}",
            x.n_rows()
        )));
    }
    Ok(KnnModel {
        feature_names: x.schema().names().to_vec(),
        data: x.values().to_vec(),
        labels: y.as_binary()?,
        k,
    })
}

/// One neighbor: (squared distance, stored row index).
pub(crate) type Neighbor = (f64, usize);

/// Picks the `k` smallest by (distance, index) from `cands` (reordered in place).
pub(crate) fn select_k(cands: &mut [Neighbor], k: usize) -> &mut [Neighbor] {
    let cmp = |a: &Neighbor, b: &Neighbor| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, cmp);
    }
    let top = &mut cands[..k];
    top.sort_by(cmp);
    top
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_stored(&self) -> usize {
        self.labels.len()
    }

    pub fn stored_row(&self, i: usize) -> &[f64] {
        let p = self.feature_names.len();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn stored_labels(&self) -> &[u8] {
        &self.labels
    }

    pub(crate) fn sq_dist(&self, i: usize, row: &[f64]) -> f64 {
        self.stored_row(i)
            .iter()
            .zip(row)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// The k nearest stored rows by (distance, index).
    pub fn neighbors(&self, row: &[f64]) -> Vec<Neighbor> {
        let mut cands: Vec<Neighbor> = (0..self.n_stored()).map(|i| (self.sq_dist(i, row), i)).collect();
        select_k(&mut cands, self.k).to_vec()
    }

    /// Fraction of attack labels among the k neighbors.
    pub fn proba(&self, row: &[f64]) -> f64 {
        vote_fraction(&self.neighbors(row), &self.labels)
    }

    /// Majority vote; ties go to the smaller summed distance, then label 0.
    pub fn predict_label(&self, row: &[f64]) -> u8 {
        vote_label(&self.neighbors(row), &self.labels)
    }
}

pub(crate) fn vote_fraction(nb: &[Neighbor], labels: &[u8]) -> f64 {
    nb.iter().filter(|(_, i)| labels[*i] == 1).count() as f64 / nb.len() as f64
}

pub(crate) fn vote_label(nb: &[Neighbor], labels: &[u8]) -> u8 {
    let mut count = [0usize; 2];
    let mut dist = [0.0f64; 2];
    for &(d, i) in nb {
        let c = labels[i] as usize;
        count[c] += 1;
        dist[c] += d.sqrt();
    }
    if count[1] > count[0] || (count[1] == count[0] && dist[1] < dist[0]) {
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: &[Vec<f64>], y: Vec<u32>, k: usize) -> KnnModel {
        let x = FeatureMatrix::from_rows_anonymous(rows, rows[0].len()).unwrap();
        train_knn(&x, &LabelVector::binary(y).unwrap(), k).unwrap()
    }

    #[test]
    fn k_bounds() {
        let x = FeatureMatrix::from_rows_anonymous(&[vec![0.0], vec![1.0]], 1).unwrap();
        let y = LabelVector::binary(vec![0, 1]).unwrap();
        assert!(train_knn(&x, &y, 0).is_err());
        assert!(train_knn(&x, &y, 3).is_err());
        assert!(train_knn(&x, &y, 2).is_ok());
    }

    #[test]
    fn vote_fraction_three_of_five() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let m = fit(&rows, vec![1, 0, 1, 0, 1, 0, 0, 0], 5);
        assert!((m.proba(&[0.0]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tie_goes_to_closer_class() {
        let rows = vec![vec![0.0], vec![3.0], vec![-1.0], vec![2.5]];
        // k=4 around 0.9: class 0 at distances 0.9, 1.9; class 1 at 2.1, 1.6
        let m = fit(&rows, vec![0, 1, 0, 1], 4);
        assert_eq!(m.predict_label(&[0.9]), 0);
        let m = fit(&rows, vec![1, 0, 1, 0], 4);
        assert_eq!(m.predict_label(&[0.9]), 1);
    }
}
