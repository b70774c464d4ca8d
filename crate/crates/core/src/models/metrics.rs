use serde::{Deserialize, Serialize};

/// Binary classification metrics at threshold 0.5.
///
/// `confusion[actual][predicted]`, class 0 benign, 1 attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: [[usize; 2]; 2],
}

impl Metrics {
    pub fn from_predictions(actual: &[u8], predicted: &[u8]) -> Self {
        assert_eq!(actual.len(), predicted.len(), "aligned label slices");
        let mut c = [[0usize; 2]; 2];
        for (&a, &p) in actual.iter().zip(predicted) {
            c[a as usize][p as usize] += 1;
        }
        let n = actual.len();
        let (tn, fp, fnn, tp) = (c[0][0], c[0][1], c[1][0], c[1][1]);
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fnn);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            n,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
            confusion: c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0];
        let m = Metrics::from_predictions(&y, &y);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion, [[2, 0], [0, 2]]);
    }

    #[test]
    fn ten_predictions_two_errors() {
        let actual = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let predicted = [0, 0, 0, 0, 1, 1, 1, 1, 1, 0];
        let m = Metrics::from_predictions(&actual, &predicted);
        assert_eq!(m.accuracy, 0.8);
        assert_eq!(m.confusion, [[4, 1], [1, 4]]);
        assert_eq!(m.precision, 0.8);
        assert_eq!(m.recall, 0.8);
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }
}
