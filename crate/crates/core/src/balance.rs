//! Rebalancing: undersample large groups, SMOTE-oversample small ones, then
//! collapse labels to benign/attack.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabelLevel, LabelTaxonomy, LabelVector};
use crate::error::{Error, Result};
use crate::models::{select_k, Neighbor};
use crate::seed;

/// Desired row count per group at one label level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancePlan {
    pub level: LabelLevel,
    pub targets: BTreeMap<String, usize>,
}

impl BalancePlan {
    pub fn new(level: LabelLevel, targets: BTreeMap<String, usize>) -> Result<Self> {
        if let Some((g, _)) = targets.iter().find(|(_, &t)| t == 0) {
            return Err(Error::Parameter(format!("target for `{g}` must be positive")));
        }
        Ok(Self { level, targets })
    }

    /// Benign capped at 2100 and each attack class set to 300.
    pub fn ciciot_default(taxonomy: &LabelTaxonomy) -> Self {
        let targets = taxonomy
            .class_names()
            .into_iter()
            .map(|c| {
                let t = if c == taxonomy.benign_class() { 2100 } else { 300 };
                (c, t)
            })
            .collect();
        Self {
            level: LabelLevel::Class,
            targets,
        }
    }

    pub fn total(&self) -> usize {
        self.targets.values().sum()
    }

    /// Fails when a group is unknown to the taxonomy at the plan's level.
    pub fn validate(&self, taxonomy: &LabelTaxonomy) -> Result<()> {
        let known = taxonomy.names_at(self.level);
        let unknown: Vec<String> = self.targets.keys().filter(|g| !known.contains(g)).cloned().collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownLabel(unknown))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoteParams {
    pub k: usize,
    pub seed: u64,
    /// Lower `k` to `group size - 1` for tiny groups instead of failing.
    pub clamp_k: bool,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            clamp_k: false,
        }
    }
}

/// Where a synthetic row came from: `base + lambda * (neighbor - base)`,
/// with indices local to the group matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

fn effective_k(n: usize, params: &SmoteParams, group: &str) -> Result<usize> {
    if params.k == 0 {
        return Err(Error::Parameter("smote k must be at least 1".into()));
    }
    if params.k >= n {
        if params.clamp_k {
            return Ok(n - 1);
        }
        return Err(Error::Parameter(format!(
            "smote k = {} needs more than {} rows in group `{group}`",
            params.k, n
        )));
    }
    Ok(params.k)
}

/// `target - n` synthetic rows for one group. Base rows are taken
/// round-robin over a seeded permutation; each picks a uniformly random
/// neighbor among its `k` nearest (Euclidean, ties by index) and a
/// uniform `lambda` in [0, 1).
pub fn smote_oversample(
    group: &FeatureMatrix,
    target: usize,
    params: &SmoteParams,
    name: &str,
) -> Result<(FeatureMatrix, Vec<SmoteOrigin>)> {
    let n = group.n_rows();
    if n < 2 {
        return Err(Error::CannotInterpolate {
            group: name.to_string(),
            count: n,
        });
    }
    if target < n {
        return Err(Error::Parameter(format!(
            "target {target} is below the {n} rows of `{name}`; undersample instead"
        )));
    }
    let k = effective_k(n, params, name)?;
    let needed = target - n;
    let p = group.n_cols();
    let mut rng = seed::rng(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut cands: Vec<Neighbor> = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(needed * p);
    let mut origins = Vec::with_capacity(needed);
    for s in 0..needed {
        let base = order[s % n];
        let nb = neighbors[base].get_or_insert_with(|| {
            let xb = group.row(base);
            cands.clear();
            cands.extend((0..n).filter(|&j| j != base).map(|j| {
                let d: f64 = group.row(j).iter().zip(xb).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, j)
            }));
            select_k(&mut cands, k).iter().map(|&(_, j)| j).collect()
        });
        let neighbor = nb[rng.random_range(0..nb.len())];
        let lambda: f64 = rng.random();
        let (xb, xn) = (group.row(base), group.row(neighbor));
        values.extend(xb.iter().zip(xn).map(|(b, m)| b + lambda * (m - b)));
        origins.push(SmoteOrigin { base, neighbor, lambda });
    }
    let synth = FeatureMatrix::new(group.schema().clone(), needed, values)?.with_scaler(group.scaler().cloned());
    Ok((synth, origins))
}

/// Seeded uniform choice of `target` rows without replacement; returns the
/// chosen indices in ascending order.
pub fn undersample(n: usize, target: usize, seed: u64) -> Result<Vec<usize>> {
    if target > n {
        return Err(Error::Parameter(format!(
            "cannot undersample {n} rows to {target}; oversample instead"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    idx.truncate(target);
    idx.sort_unstable();
    Ok(idx)
}

/// Per-row origin in a balanced set; indices refer to the input matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOrigin {
    Real { source: usize },
    Synthetic { base: usize, neighbor: usize, lambda: f64 },
}

impl RowOrigin {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub group: String,
    pub before: usize,
    pub after: usize,
    pub synthetic: usize,
}

#[derive(Debug, Clone)]
pub struct Balanced {
    pub x: FeatureMatrix,
    pub labels: LabelVector,
    pub origins: Vec<RowOrigin>,
    pub counts: Vec<GroupCount>,
}

impl Balanced {
    pub fn synthetic_flags(&self) -> Vec<bool> {
        self.origins.iter().map(RowOrigin::is_synthetic).collect()
    }

    pub fn n_synthetic(&self) -> usize {
        self.origins.iter().filter(|o| o.is_synthetic()).count()
    }
}

/// Applies `plan` group by group, in label-id order. Rows of each group are
/// emitted real first, then synthetic. Groups absent from the plan pass
/// through unchanged.
pub fn apply_plan(
    x: &FeatureMatrix,
    labels: &LabelVector,
    plan: &BalancePlan,
    params: &SmoteParams,
) -> Result<Balanced> {
    if labels.level() != plan.level {
        return Err(Error::Parameter(format!(
            "plan targets {:?} groups but labels are at {:?} level",
            plan.level,
            labels.level()
        )));
    }
    if x.n_rows() != labels.len() {
        return Err(Error::Parameter("matrix and labels are not aligned".into()));
    }
    if let Some(g) = plan.targets.keys().find(|g| !labels.names().contains(g)) {
        return Err(Error::UnknownLabel(vec![g.clone()]));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.names().len()];
    for (i, &id) in labels.ids().iter().enumerate() {
        members[id as usize].push(i);
    }

    let mut out_x = FeatureMatrix::empty(x.schema().clone()).with_scaler(x.scaler().cloned());
    let mut out_ids = Vec::new();
    let mut origins = Vec::new();
    let mut counts = Vec::new();
    for (id, rows) in members.iter().enumerate() {
        let name = &labels.names()[id];
        let before = rows.len();
        let target = plan.targets.get(name).copied().unwrap_or(before);
        let mut synthetic = 0;
        if target <= before {
            let keep = if target == before {
                (0..before).collect()
            } else {
                undersample(before, target, seed::derive(params.seed, &format!("undersample/{name}")))?
            };
            let src: Vec<usize> = keep.iter().map(|&i| rows[i]).collect();
            out_x = out_x.vstack(&x.select_rows(&src))?;
            origins.extend(src.iter().map(|&s| RowOrigin::Real { source: s }));
        } else {
            let group = x.select_rows(rows);
            let group_params = SmoteParams {
                seed: seed::derive(params.seed, &format!("smote/{name}")),
                ..params.clone()
            };
            let (synth, o) = smote_oversample(&group, target, &group_params, name)?;
            out_x = out_x.vstack(&group)?.vstack(&synth)?;
            origins.extend(rows.iter().map(|&s| RowOrigin::Real { source: s }));
            origins.extend(o.iter().map(|o| RowOrigin::Synthetic {
                base: rows[o.base],
                neighbor: rows[o.neighbor],
                lambda: o.lambda,
            }));
            synthetic = o.len();
        }
        out_ids.extend(std::iter::repeat_n(id as u32, target));
        if before > 0 || plan.targets.contains_key(name) {
            counts.push(GroupCount {
                group: name.clone(),
                before,
                after: target,
                synthetic,
            });
        }
    }
    Ok(Balanced {
        x: out_x,
        labels: LabelVector::new(labels.level(), out_ids, labels.names().to_vec())?,
        origins,
        counts,
    })
}

/// Benign -> 0, everything else -> 1.
pub fn binarize(labels: &LabelVector, taxonomy: &LabelTaxonomy) -> Result<LabelVector> {
    if labels.level() == LabelLevel::Binary {
        return Ok(labels.clone());
    }
    let mut map = Vec::with_capacity(labels.names().len());
    for name in labels.names() {
        map.push(
            taxonomy
                .binary_of(name)
                .ok_or_else(|| Error::UnknownLabel(vec![name.clone()]))?,
        );
    }
    LabelVector::binary(labels.ids().iter().map(|&i| u32::from(map[i as usize])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows_anonymous(rows, rows[0].len()).unwrap()
    }

    #[test]
    fn two_point_group_interpolates_on_the_diagonal() {
        let g = group(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let params = SmoteParams { k: 1, ..Default::default() };
        let (s, o) = smote_oversample(&g, 3, &params, "g").unwrap();
        assert_eq!(s.n_rows(), 1);
        let r = s.row(0);
        assert!((r[0] - r[1]).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r[0]));
        let expect = if o[0].base == 0 { o[0].lambda } else { 1.0 - o[0].lambda };
        assert!((r[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn target_equal_to_size_adds_nothing() {
        let g = group(&[vec![0.0], vec![1.0], vec![3.0]]);
        let (s, o) = smote_oversample(&g, 3, &SmoteParams { k: 2, ..Default::default() }, "g").unwrap();
        assert_eq!(s.n_rows(), 0);
        assert!(o.is_empty());
    }

    #[test]
    fn tiny_groups_error_or_clamp() {
        let one = group(&[vec![0.0]]);
        assert!(matches!(
            smote_oversample(&one, 5, &SmoteParams::default(), "Solo"),
            Err(Error::CannotInterpolate { count: 1, .. })
        ));
        let three = group(&[vec![0.0], vec![1.0], vec![2.0]]);
        let err = smote_oversample(&three, 5, &SmoteParams::default(), "Bruteforce").unwrap_err();
        assert!(err.to_string().contains("Bruteforce"), "{err}");
        let clamp = SmoteParams { clamp_k: true, ..Default::default() };
        let (s, _) = smote_oversample(&three, 5, &clamp, "Bruteforce").unwrap();
        assert_eq!(s.n_rows(), 2);
    }

    #[test]
    fn base_points_are_spread_evenly() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let (_, o) = smote_oversample(&group(&rows), 7 + 17, &SmoteParams { k: 3, ..Default::default() }, "g").unwrap();
        let mut per = [0usize; 7];
        for x in &o {
            per[x.base] += 1;
        }
        let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
        assert!(hi - lo <= 1, "{per:?}");
    }

    #[test]
    fn undersample_keeps_distinct_originals() {
        let idx = undersample(2376, 2100, 4).unwrap();
        assert_eq!(idx.len(), 2100);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(undersample(5, 6, 0).is_err());
        assert_eq!(undersample(4, 4, 1).unwrap(), vec![0, 1, 2, 3]);
    }

    fn toy_labels(counts: &[usize]) -> (FeatureMatrix, LabelVector) {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for (g, &c) in counts.iter().enumerate() {
            for i in 0..c {
                rows.push(vec![g as f64 * 10.0 + i as f64, (i % 3) as f64]);
                ids.push(g as u32);
            }
        }
        let names = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        (
            group(&rows),
            LabelVector::new(LabelLevel::Class, ids, names).unwrap(),
        )
    }

    #[test]
    fn three_group_toy_reaches_six_each() {
        let (x, y) = toy_labels(&[10, 4, 7]);
        let plan = BalancePlan::new(
            LabelLevel::Class,
            [("A", 6), ("B", 6), ("C", 6)].iter().map(|(g, t)| (g.to_string(), *t)).collect(),
        )
        .unwrap();
        let b = apply_plan(&x, &y, &plan, &SmoteParams { k: 2, ..Default::default() }).unwrap();
        assert_eq!(b.labels.counts(), vec![6, 6, 6]);
        for (i, o) in b.origins.iter().enumerate() {
            if o.is_synthetic() {
                assert_eq!(b.labels.name_of(i), "B");
            }
        }
        assert_eq!(b.n_synthetic(), 2);
        let real = b.origins.len() - b.n_synthetic();
        assert_eq!(real, 6 + 4 + 6);
    }

    #[test]
    fn plan_equal_to_counts_is_identity() {
        let (x, y) = toy_labels(&[3, 4, 5]);
        let plan = BalancePlan::new(
            LabelLevel::Class,
            [("A", 3), ("B", 4), ("C", 5)].iter().map(|(g, t)| (g.to_string(), *t)).collect(),
        )
        .unwrap();
        let b = apply_plan(&x, &y, &plan, &SmoteParams::default()).unwrap();
        assert_eq!(b.x, x);
        assert_eq!(b.n_synthetic(), 0);
    }

    #[test]
    fn unknown_group_is_rejected() {
        let (x, y) = toy_labels(&[3, 4, 5]);
        let plan = BalancePlan::new(LabelLevel::Class, [("Z".to_string(), 3)].into_iter().collect()).unwrap();
        assert!(matches!(apply_plan(&x, &y, &plan, &SmoteParams::default()), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn binarize_maps_benign_to_zero() {
        let tax = LabelTaxonomy::ciciot2023();
        let names = tax.class_names();
        let ids: Vec<u32> = (0..names.len() as u32).collect();
        let y = LabelVector::new(LabelLevel::Class, ids, names.clone()).unwrap();
        let b = binarize(&y, &tax).unwrap();
        let expect: Vec<u32> = names.iter().map(|n| u32::from(n != "Benign")).collect();
        assert_eq!(b.ids(), expect.as_slice());
    }

    #[test]
    fn default_plan_totals_4200() {
        let plan = BalancePlan::ciciot_default(&LabelTaxonomy::ciciot2023());
        assert_eq!(plan.total(), 4200);
        assert_eq!(plan.targets["Benign"], 2100);
        assert_eq!(plan.targets.len(), 8);
    }
}
