//! Property tests over the public API, each checked against an independent
//! recomputation.

use std::collections::BTreeMap;

use explia::balance::{apply_plan, BalancePlan, RowOrigin, SmoteParams};
use explia::consistency::{compare_rankings, RankingSource, DEFAULT_TOP_KS};
use explia::dataset::{clean, fit_standardizer, split, standardize, FeatureMatrix, FeatureSchema, LabelLevel, LabelVector, RawRow, RawTable};
use explia::explain::{lime_explain, shap_exact, shap_tree, LimeParams};
use explia::models::{
    importance_gain, logistic, logistic_loss, train_gbt, train_knn, train_rf, FnModel, GbtParams, ImportanceMethod,
    ImportanceVector, Model, RfParams, TrainedModel,
};
use proptest::prelude::*;

fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows_anonymous(rows, rows[0].len()).unwrap()
}

/// Rows in [-5, 5]^p with binary labels that contain both classes.
fn dataset(p: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u32>)> {
    n.prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, p), n),
            prop::collection::vec(0u32..2, n),
        )
    })
    .prop_map(|(rows, mut y)| {
        y[0] = 0;
        y[1] = 1;
        (rows, y)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gbt_probability_decomposes_tree_by_tree_and_loss_never_rises(
        (rows, y) in dataset(3, 20..50),
        n_trees in 1usize..8,
        max_depth in 1usize..4,
    ) {
        let x = matrix(&rows);
        let labels = LabelVector::binary(y.clone()).unwrap();
        let params = GbtParams { n_trees, max_depth, ..Default::default() };
        let m = train_gbt(&x, &labels, &params).unwrap();
        let yb: Vec<u8> = y.iter().map(|&v| v as u8).collect();
        let mut margins = vec![m.base_score(); rows.len()];
        let mut prev = logistic_loss(&margins, &yb);
        for t in m.trees() {
            for (mg, r) in margins.iter_mut().zip(&rows) {
                *mg += m.learning_rate() * t.predict(r);
            }
            let loss = logistic_loss(&margins, &yb);
            prop_assert!(loss <= prev + 1e-12, "loss rose from {prev} to {loss}");
            prev = loss;
        }
        for (mg, r) in margins.iter().zip(&rows) {
            prop_assert!((m.predict_proba_row(r) - logistic(*mg)).abs() < 1e-12);
        }
    }

    #[test]
    fn rf_prediction_ignores_tree_order((rows, y) in dataset(3, 15..40), shift in 1usize..10) {
        let x = matrix(&rows);
        let params = RfParams { n_trees: 10, ..Default::default() };
        let m = train_rf(&x, &LabelVector::binary(y).unwrap(), &params).unwrap();
        let mut trees = m.trees().to_vec();
        let len = trees.len();
        trees.rotate_left(shift % len);
        trees.reverse();
        let shuffled = m.with_trees(trees);
        for r in &rows {
            prop_assert!((m.proba(r) - shuffled.proba(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_matches_a_full_sort_oracle(
        (rows, y) in dataset(2, 10..40),
        queries in prop::collection::vec(prop::collection::vec(-6.0f64..6.0, 2), 1..10),
        k in 1usize..8,
    ) {
        let k = k.min(rows.len());
        let x = matrix(&rows);
        let m = train_knn(&x, &LabelVector::binary(y.clone()).unwrap(), k).unwrap();
        for q in &queries {
            let mut all: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let near = &all[..k];
            let votes = near.iter().filter(|(_, i)| y[*i] == 1).count();
            let d1: f64 = near.iter().filter(|(_, i)| y[*i] == 1).map(|(d, _)| d.sqrt()).sum();
            let d0: f64 = near.iter().filter(|(_, i)| y[*i] == 0).map(|(d, _)| d.sqrt()).sum();
            let expect = u8::from(2 * votes > k || (2 * votes == k && d1 < d0));
            prop_assert_eq!(m.predict_label(q), expect);
            prop_assert!((m.proba(q) - votes as f64 / k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn knn_on_standardized_inputs_ignores_a_global_scale((rows, y) in dataset(3, 10..30), e in -3i32..4) {
        let c = 2f64.powi(e);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let std_of = |rows: &[Vec<f64>]| {
            let x = matrix(rows);
            standardize(&x, &fit_standardizer(&x).unwrap()).unwrap()
        };
        let (a, b) = (std_of(&rows), std_of(&scaled));
        let labels = LabelVector::binary(y).unwrap();
        let (ma, mb) = (train_knn(&a, &labels, 3).unwrap(), train_knn(&b, &labels, 3).unwrap());
        for i in 0..a.n_rows() {
            prop_assert_eq!(ma.predict_label(a.row(i)), mb.predict_label(b.row(i)));
        }
    }

    #[test]
    fn gain_importance_sums_to_one_with_unused_features_at_zero((rows, y) in dataset(4, 20..40)) {
        let x = matrix(&rows);
        let m = TrainedModel::Gbt(train_gbt(&x, &LabelVector::binary(y).unwrap(), &GbtParams { n_trees: 5, max_depth: 2, ..Default::default() }).unwrap());
        let g = importance_gain(&m).unwrap();
        let mut used = [false; 4];
        for t in m.as_gbt().unwrap().trees() {
            for n in t.nodes() {
                if let explia::models::Node::Split { feature, .. } = n {
                    used[*feature] = true;
                }
            }
        }
        if used.iter().any(|&u| u) {
            prop_assert!((g.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for j in 0..4 {
            if !used[j] {
                prop_assert_eq!(g.scores[j], 0.0);
            }
        }
    }

    #[test]
    fn smote_rows_lie_on_segments_to_true_neighbors(
        sizes in prop::collection::vec(2usize..15, 2..4),
        targets in prop::collection::vec(1usize..30, 4),
        values in prop::collection::vec(-10.0f64..10.0, 200),
        seed in any::<u64>(),
        k in 1usize..4,
    ) {
        let p = 2;
        let names: Vec<String> = (0..sizes.len()).map(|g| format!("g{g}")).collect();
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            for i in 0..s {
                let o = (rows.len() * p + g * 7 + i) % (values.len() - p);
                rows.push(values[o..o + p].to_vec());
                ids.push(g as u32);
            }
        }
        let x = matrix(&rows);
        let labels = LabelVector::new(LabelLevel::Class, ids.clone(), names.clone()).unwrap();
        let plan_targets: BTreeMap<String, usize> = names.iter().cloned().zip(targets.iter().copied()).collect();
        let plan = BalancePlan::new(LabelLevel::Class, plan_targets.clone()).unwrap();
        let params = SmoteParams { k, seed, clamp_k: true };
        let b = apply_plan(&x, &labels, &plan, &params).unwrap();

        prop_assert_eq!(b.x.n_rows(), b.origins.len());
        let mut hist = vec![0usize; names.len()];
        for &id in b.labels.ids() {
            hist[id as usize] += 1;
        }
        for (g, name) in names.iter().enumerate() {
            prop_assert_eq!(hist[g], plan_targets[name]);
        }
        let real = b.origins.iter().filter(|o| !o.is_synthetic()).count();
        let expect_real: usize = names.iter().enumerate().map(|(g, n)| sizes[g].min(plan_targets[n])).sum();
        prop_assert_eq!(real, expect_real);

        for (r, o) in b.origins.iter().enumerate() {
            if let RowOrigin::Synthetic { base, neighbor, lambda } = *o {
                prop_assert!((0.0..=1.0).contains(&lambda));
                prop_assert_eq!(ids[base], ids[neighbor]);
                for j in 0..p {
                    let want = x.get(base, j) + lambda * (x.get(neighbor, j) - x.get(base, j));
                    prop_assert!((b.x.get(r, j) - want).abs() < 1e-12);
                }
                let group: Vec<usize> = (0..rows.len()).filter(|&i| ids[i] == ids[base] && i != base).collect();
                let kk = k.min(group.len());
                let mut d: Vec<(f64, usize)> = group
                    .iter()
                    .map(|&i| ((0..p).map(|j| (x.get(i, j) - x.get(base, j)).powi(2)).sum(), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                prop_assert!(d[..kk].iter().any(|&(_, i)| i == neighbor));
            }
        }
        let again = apply_plan(&x, &labels, &plan, &params).unwrap();
        prop_assert_eq!(again.x.values(), b.x.values());
    }

    #[test]
    fn split_is_a_function_of_its_seed((rows, y) in dataset(2, 40..80), seed in any::<u64>()) {
        let x = matrix(&rows);
        let labels = LabelVector::binary(y).unwrap();
        let a = split(&x, &labels, 0.8, seed, true).unwrap();
        let b = split(&x, &labels, 0.8, seed, true).unwrap();
        let c = split(&x, &labels, 0.8, seed ^ 0x9e37_79b9, true).unwrap();
        prop_assert_eq!(&a.train_indices, &b.train_indices);
        prop_assert_ne!(&a.train_indices, &c.train_indices);
        let mut all: Vec<usize> = a.train_indices.iter().chain(&a.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..rows.len()).collect::<Vec<_>>());
    }

    #[test]
    fn standardization_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..30)) {
        let x = matrix(&rows);
        let stats = fit_standardizer(&x).unwrap();
        let back = stats.inverse(&standardize(&x, &stats).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(x.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn clean_leaves_no_nonfinite_cells_or_duplicates(
        cells in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.0, f64::NAN, f64::INFINITY]), 2..60),
        labels in prop::collection::vec(prop::sample::select(vec!["BenignTraffic", "DDoS-ICMP_Flood"]), 30),
    ) {
        let schema = std::sync::Arc::new(FeatureSchema::new(vec!["a".into(), "b".into()]).unwrap());
        let rows = cells
            .chunks(2)
            .zip(&labels)
            .map(|(c, l)| RawRow {
                values: c.iter().map(|&v| Some(v)).chain(std::iter::repeat(None)).take(2).collect(),
                label: l.to_string(),
                known: true,
            })
            .collect();
        let (t, _) = clean(&RawTable { schema, rows });
        let mut seen = Vec::new();
        for r in &t.rows {
            prop_assert!(r.values.iter().all(|v| v.is_some_and(f64::is_finite)));
            let key = (r.values.iter().map(|v| v.unwrap().to_bits()).collect::<Vec<_>>(), r.label.clone());
            prop_assert!(!seen.contains(&key));
            seen.push(key);
        }
    }

    #[test]
    fn tree_shap_equals_exact_and_ignores_unused_features(
        (rows, y) in dataset(5, 20..40),
        use_rf in any::<bool>(),
        query in prop::collection::vec(-6.0f64..6.0, 5),
    ) {
        // column 4 is constant, so no tree can split on it
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r[4] = 0.5; r }).collect();
        let x = matrix(&rows);
        let labels = LabelVector::binary(y).unwrap();
        let model = if use_rf {
            TrainedModel::Rf(train_rf(&x, &labels, &RfParams { n_trees: 4, max_depth: Some(3), ..Default::default() }).unwrap())
        } else {
            TrainedModel::Gbt(train_gbt(&x, &labels, &GbtParams { n_trees: 4, max_depth: 3, ..Default::default() }).unwrap())
        };
        let bg = x.select_rows(&(0..8).collect::<Vec<_>>());
        let t = shap_tree(&model, &query, &bg).unwrap();
        let e = shap_exact(&model, &query, &bg, model.native_space()).unwrap();
        for (a, b) in t.phi.iter().zip(&e.phi) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert!(t.additivity_error() < 1e-9);
        prop_assert_eq!(t.phi[4], 0.0);
        prop_assert_eq!(t.implied_class(), model.predict_class_row(&query));
    }

    #[test]
    fn ranking_pairs_are_symmetric_and_unaffected_by_extra_sources(
        a in prop::collection::vec(0.0f64..1.0, 12),
        b in prop::collection::vec(0.0f64..1.0, 12),
        c in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let names: Vec<String> = (0..12).map(|j| format!("f{j}")).collect();
        let src = |l: &str, s: &[f64]| RankingSource::new(l, ImportanceVector::new(ImportanceMethod::Gain, names.clone(), s.to_vec()).unwrap());
        let ab = compare_rankings(&[src("a", &a), src("b", &b)], &DEFAULT_TOP_KS).unwrap();
        let ba = compare_rankings(&[src("b", &b), src("a", &a)], &DEFAULT_TOP_KS).unwrap();
        let abc = compare_rankings(&[src("a", &a), src("b", &b), src("c", &c)], &DEFAULT_TOP_KS).unwrap();
        let p = &ab.pairs[0];
        prop_assert_eq!(&p.top_k, &ba.pairs[0].top_k);
        prop_assert_eq!(p.kendall_tau_b, ba.pairs[0].kendall_tau_b);
        prop_assert_eq!(abc.pair("a", "b").unwrap(), p);
        for t in &p.top_k {
            prop_assert!((0.0..=1.0).contains(&t.jaccard));
        }
        if let Some(tau) = p.kendall_tau_b {
            prop_assert!((-1.0..=1.0).contains(&tau));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lime_is_seeded_and_local_weights_follow_the_gradient(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        x0 in prop::collection::vec(-1.0f64..1.0, 3),
        seed in any::<u64>(),
    ) {
        prop_assume!(a.abs() > 0.2 && b.abs() > 0.2);
        let f = FnModel::new(3, move |r: &[f64]| logistic(a * r[0] + b * r[1] + 0.3 * r[0] * r[1]));
        let params = LimeParams { k: 2, kernel_width: Some(0.3), seed, ..Default::default() };
        let scale = [0.1; 3];
        let e1 = lime_explain(&f, &x0, Some(&scale), &params).unwrap();
        let e2 = lime_explain(&f, &x0, Some(&scale), &params).unwrap();
        prop_assert_eq!(&e1, &e2);
        // finite-difference gradient at x0
        let h = 1e-5;
        for feat in &e1.features {
            let mut up = x0.clone();
            up[feat.index] += h;
            let mut dn = x0.clone();
            dn[feat.index] -= h;
            let g = (f.predict_proba_row(&up) - f.predict_proba_row(&dn)) / (2.0 * h);
            if g.abs() > 1e-3 {
                prop_assert_eq!(feat.weight.signum(), g.signum());
            }
        }
    }
}
