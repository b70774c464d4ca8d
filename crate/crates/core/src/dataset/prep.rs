use std::sync::Arc;

use rand::seq::SliceRandom;

use super::matrix::{FeatureMatrix, LabelVector, ScalerStats};
use crate::error::{Error, Result};
use crate::seed;

/// Per-feature mean and population std (divide by n) over all rows.
pub fn fit_standardizer(matrix: &FeatureMatrix) -> Result<ScalerStats> {
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("cannot fit a standardizer on zero rows".into()));
    }
    let p = matrix.n_cols();
    let mut means = vec![0.0; p];
    for r in matrix.rows() {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; p];
    for r in matrix.rows() {
        for j in 0..p {
            let d = r[j] - means[j];
            stds[j] += d * d;
        }
    }
    for j in 0..p {
        stds[j] = (stds[j] / n as f64).sqrt();
        // exact constants can leave rounding residue in the mean
        if matrix.rows().all(|r| r[j] == matrix.get(0, j)) {
            stds[j] = 0.0;
        }
    }
    ScalerStats::new(Arc::clone(matrix.schema()), means, stds, n)
}

/// `(v - mean) / std` per column; columns with std 0 pass through.
pub fn standardize(matrix: &FeatureMatrix, stats: &ScalerStats) -> Result<FeatureMatrix> {
    matrix.check_schema(stats.schema())?;
    let p = matrix.n_cols();
    let mut values = matrix.values().to_vec();
    for (k, v) in values.iter_mut().enumerate() {
        let j = k % p;
        if stats.stds[j] > 0.0 {
            *v = (*v - stats.means[j]) / stats.stds[j];
        }
    }
    Ok(FeatureMatrix::new(Arc::clone(matrix.schema()), matrix.n_rows(), values)?
        .with_scaler(Some(stats.clone())))
}

/// Removes exactly the columns whose fitted std is 0; returns the surviving
/// column indices.
pub fn drop_zero_variance(matrix: &FeatureMatrix, stats: &ScalerStats) -> Result<(FeatureMatrix, Vec<usize>)> {
    matrix.check_schema(stats.schema())?;
    let kept: Vec<usize> = (0..matrix.n_cols()).filter(|&j| !stats.is_flagged(j)).collect();
    Ok((matrix.select_columns(&kept), kept))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: (FeatureMatrix, LabelVector),
    pub test: (FeatureMatrix, LabelVector),
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded shuffle then partition; `ratio` is the train fraction.
///
/// With `stratify`, each label contributes `round(count * ratio)` rows to
/// train (kept within `1..count`), so per-label proportions stay within one
/// row of the whole.
pub fn split(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    ratio: f64,
    seed: u64,
    stratify: bool,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Parameter(format!("split ratio {ratio} must be in (0, 1)")));
    }
    if matrix.n_rows() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} rows but {} labels",
            matrix.n_rows(),
            labels.len()
        )));
    }
    let n = matrix.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));

    let (train_idx, test_idx) = if stratify {
        let counts = labels.counts();
        for (id, &c) in counts.iter().enumerate() {
            if c > 0 && c < 2 {
                return Err(Error::Stratification {
                    label: labels.names()[id].clone(),
                    count: c,
                });
            }
        }
        let quota: Vec<usize> = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    0
                } else {
                    ((c as f64 * ratio).round() as usize).clamp(1, c - 1)
                }
            })
            .collect();
        let mut taken = vec![0usize; counts.len()];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for &i in &order {
            let id = labels.ids()[i] as usize;
            if taken[id] < quota[id] {
                taken[id] += 1;
                train.push(i);
            } else {
                test.push(i);
            }
        }
        (train, test)
    } else {
        let n_train = (n as f64 * ratio).round() as usize;
        (order[..n_train].to_vec(), order[n_train..].to_vec())
    };

    Ok(DatasetSplit {
        train: (matrix.select_rows(&train_idx), labels.select(&train_idx)),
        test: (matrix.select_rows(&test_idx), labels.select(&test_idx)),
        train_indices: train_idx,
        test_indices: test_idx,
        seed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabelLevel;

    fn m(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows_anonymous(rows, rows[0].len()).unwrap()
    }

    #[test]
    fn standardizer_examples() {
        let one = m(&[vec![3.0, -1.0]]);
        let s = fit_standardizer(&one).unwrap();
        assert_eq!(s.means, vec![3.0, -1.0]);
        assert_eq!(s.stds, vec![0.0, 0.0]);

        let two = m(&[vec![0.0, 5.0], vec![2.0, 5.0]]);
        let s = fit_standardizer(&two).unwrap();
        assert_eq!(s.means, vec![1.0, 5.0]);
        assert_eq!(s.stds, vec![1.0, 0.0]);
        assert_eq!(s.zero_variance(), vec![1]);

        let z = standardize(&two, &s).unwrap();
        assert!(z.is_standardized());
        assert_eq!(z.column(0), vec![-1.0, 1.0]);
        assert_eq!(z.column(1), vec![5.0, 5.0]);
    }

    #[test]
    fn empty_fit_is_error() {
        let schema = Arc::new(crate::dataset::FeatureSchema::new(vec!["a".into()]).unwrap());
        let e = FeatureMatrix::empty(schema);
        assert!(matches!(fit_standardizer(&e), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn self_standardization_gives_zero_mean_unit_std() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 3.7 + 1e3, ((i * 7919) % 13) as f64, -2.5])
            .collect();
        let x = m(&rows);
        let s = fit_standardizer(&x).unwrap();
        let z = standardize(&x, &s).unwrap();
        let s2 = fit_standardizer(&z).unwrap();
        for j in 0..2 {
            assert!(s2.means[j].abs() < 1e-9);
            assert!((s2.stds[j] - 1.0).abs() < 1e-9);
        }
        assert_eq!(z.column(2), vec![-2.5; 50]);
    }

    #[test]
    fn drop_zero_variance_cases() {
        let x = m(&[vec![1.0, 2.0, 3.0], vec![1.0, 4.0, 3.0]]);
        let s = fit_standardizer(&x).unwrap();
        let (d, kept) = drop_zero_variance(&x, &s).unwrap();
        assert_eq!(kept, vec![1]);
        assert_eq!(d.schema().names(), &["x1".to_string()]);

        let y = m(&[vec![1.0, 2.0], vec![2.0, 3.0]]);
        let (d, kept) = drop_zero_variance(&y, &fit_standardizer(&y).unwrap()).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(d, y);

        let c = m(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let (d, kept) = drop_zero_variance(&c, &fit_standardizer(&c).unwrap()).unwrap();
        assert!(kept.is_empty());
        assert_eq!(d.n_cols(), 0);
    }

    fn binary_labels(ids: Vec<u32>) -> LabelVector {
        LabelVector::binary(ids).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let rows: Vec<Vec<f64>> = (0..4200).map(|i| vec![i as f64]).collect();
        let x = m(&rows);
        let y = binary_labels((0..4200).map(|i| (i % 2) as u32).collect());
        let s = split(&x, &y, 0.8, 9, false).unwrap();
        assert_eq!((s.train.0.n_rows(), s.test.0.n_rows()), (3360, 840));
        let s2 = split(&x, &y, 0.8, 9, false).unwrap();
        assert_eq!(s.train_indices, s2.train_indices);
        let s3 = split(&x, &y, 0.8, 10, false).unwrap();
        assert_ne!(s.train_indices, s3.train_indices);
        let st = split(&x, &y, 0.8, 9, true).unwrap();
        assert_eq!(st.train.1.counts(), vec![1680, 1680]);
    }

    #[test]
    fn stratified_ten_rows() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = binary_labels((0..10).map(|i| u32::from(i >= 5)).collect());
        let s = split(&m(&rows), &y, 0.8, 3, true).unwrap();
        assert_eq!(s.train.1.counts(), vec![4, 4]);
        assert_eq!(s.test.1.counts(), vec![1, 1]);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn stratify_rejects_singleton_stratum() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = LabelVector::new(LabelLevel::Class, vec![0, 0, 0, 0, 1], vec!["a".into(), "b".into()]).unwrap();
        let err = split(&m(&rows), &y, 0.8, 1, true).unwrap_err();
        assert!(matches!(err, Error::Stratification { ref label, count: 1 } if label == "b"));
    }

    #[test]
    fn bad_ratio() {
        let x = m(&[vec![1.0], vec![2.0]]);
        let y = binary_labels(vec![0, 1]);
        assert!(split(&x, &y, 1.0, 0, false).is_err());
        assert!(split(&x, &y, 0.0, 0, false).is_err());
    }
}
