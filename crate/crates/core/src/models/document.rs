//! Line-oriented text format for trained models. Floats are written with
//! Rust's shortest round-trip formatting, so a reloaded model predicts
//! bit-identically.

use std::fmt::Write as _;

use super::{DecisionTree, GbtModel, GbtParams, KnnModel, Node, RfModel, RfParams, TrainedModel};
use crate::error::{Error, Result};

pub const DOCUMENT_VERSION: &str = "explia-model v1";

pub fn serialize(model: &TrainedModel) -> String {
    let mut out = String::new();
    out.push_str(DOCUMENT_VERSION);
    out.push('\n');
    let _ = writeln!(out, "kind {}", model.kind());
    let names = model.feature_names();
    let _ = writeln!(out, "features {}", names.len());
    for (i, n) in names.iter().enumerate() {
        let _ = writeln!(out, "feature {i} {n}");
    }
    match model {
        TrainedModel::Gbt(m) => {
            let _ = writeln!(out, "params {}", serde_json::to_string(&m.params).expect("params serialize"));
            let _ = writeln!(out, "base_score {}", m.base_score);
            let _ = writeln!(out, "learning_rate {}", m.learning_rate);
            let _ = writeln!(out, "trees {}", m.trees.len());
            for t in &m.trees {
                write_tree(&mut out, t, None);
            }
        }
        TrainedModel::Rf(m) => {
            let _ = writeln!(out, "params {}", serde_json::to_string(&m.params).expect("params serialize"));
            let _ = writeln!(out, "max_features {}", m.max_features);
            let _ = writeln!(out, "trees {}", m.trees.len());
            for (t, s) in m.trees.iter().zip(&m.tree_seeds) {
                write_tree(&mut out, t, Some(*s));
            }
        }
        TrainedModel::Knn(m) => {
            let _ = writeln!(out, "k {}", m.k);
            let _ = writeln!(out, "rows {}", m.labels.len());
            let p = names.len();
            for (i, &label) in m.labels.iter().enumerate() {
                out.push_str("row ");
                out.push_str(&label.to_string());
                for v in &m.data[i * p..(i + 1) * p] {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
        }
    }
    out.push_str("end\n");
    out
}

fn write_tree(out: &mut String, tree: &DecisionTree, seed: Option<u64>) {
    match seed {
        Some(s) => {
            let _ = writeln!(out, "tree {} seed {s}", tree.nodes().len());
        }
        None => {
            let _ = writeln!(out, "tree {}", tree.nodes().len());
        }
    }
    for n in tree.nodes() {
        match *n {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                gain,
                cover,
            } => {
                let _ = writeln!(out, "split {feature} {threshold} {left} {right} {gain} {cover}");
            }
            Node::Leaf { value, cover } => {
                let _ = writeln!(out, "leaf {value} {cover}");
            }
        }
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => {
                self.line += 1;
                Err(self.corrupt("unexpected end of document"))
            }
        }
    }

    /// Next line, which must start with `key `; returns the remainder.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_line()?;
        match l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => Ok(rest),
            None => Err(self.corrupt(format!("expected `{key}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.corrupt(format!("bad {what} `{s}`")))
    }

    fn float(&self, s: &str, what: &str) -> Result<f64> {
        let v: f64 = self.parse(s, what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.corrupt(format!("non-finite {what}")))
        }
    }
}

pub fn deserialize(text: &str) -> Result<TrainedModel> {
    let mut ln = Lines {
        iter: text.lines().enumerate(),
        line: 0,
    };
    let header = ln.next_line()?;
    if header != DOCUMENT_VERSION {
        return Err(Error::Version {
            found: header.to_string(),
            expected: DOCUMENT_VERSION.to_string(),
        });
    }
    let kind = ln.field("kind")?;
    let p: usize = {
        let s = ln.field("features")?;
        ln.parse(s, "feature count")?
    };
    let mut names = Vec::with_capacity(p);
    for i in 0..p {
        let rest = ln.field("feature")?;
        let (idx, name) = rest.split_once(' ').ok_or_else(|| ln.corrupt("feature line needs index and name"))?;
        if ln.parse::<usize>(idx, "feature index")? != i {
            return Err(ln.corrupt("feature indices out of order"));
        }
        names.push(name.to_string());
    }
    let model = match kind {
        "gbt" => {
            let params: GbtParams =
                serde_json::from_str(ln.field("params")?).map_err(|e| ln.corrupt(e.to_string()))?;
            let base = ln.field("base_score")?;
            let base_score = ln.float(base, "base_score")?;
            let lr = ln.field("learning_rate")?;
            let learning_rate = ln.float(lr, "learning_rate")?;
            let trees = read_trees(&mut ln, p, false)?.into_iter().map(|(t, _)| t).collect();
            TrainedModel::Gbt(GbtModel {
                feature_names: names,
                trees,
                learning_rate,
                base_score,
                params,
            })
        }
        "rf" => {
            let params: RfParams =
                serde_json::from_str(ln.field("params")?).map_err(|e| ln.corrupt(e.to_string()))?;
            let mf = ln.field("max_features")?;
            let max_features = ln.parse(mf, "max_features")?;
            let (trees, seeds): (Vec<_>, Vec<_>) = read_trees(&mut ln, p, true)?.into_iter().unzip();
            if trees.is_empty() {
                return Err(ln.corrupt("forest has no trees"));
            }
            TrainedModel::Rf(RfModel {
                feature_names: names,
                trees,
                tree_seeds: seeds.into_iter().map(|s| s.unwrap_or(0)).collect(),
                max_features,
                params,
            })
        }
        "knn" => {
            let k_s = ln.field("k")?;
            let k: usize = ln.parse(k_s, "k")?;
            let n_s = ln.field("rows")?;
            let n: usize = ln.parse(n_s, "row count")?;
            if k == 0 || k > n {
                return Err(ln.corrupt(format!("k = {k} with {n} stored rows")));
            }
            let mut data = Vec::with_capacity(n * p);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let rest = ln.field("row")?;
                let mut parts = rest.split(' ');
                let label: u8 = ln.parse(parts.next().unwrap_or(""), "label")?;
                if label > 1 {
                    return Err(ln.corrupt("label must be 0 or 1"));
                }
                labels.push(label);
                let before = data.len();
                for v in parts {
                    data.push(ln.float(v, "value")?);
                }
                if data.len() - before != p {
                    return Err(ln.corrupt(format!("row has {} values, expected {p}", data.len() - before)));
                }
            }
            TrainedModel::Knn(KnnModel {
                feature_names: names,
                data,
                labels,
                k,
            })
        }
        other => return Err(ln.corrupt(format!("unknown model kind `{other}`"))),
    };
    if ln.next_line()? != "end" {
        return Err(ln.corrupt("expected `end`"));
    }
    Ok(model)
}

fn read_trees(ln: &mut Lines<'_>, p: usize, seeded: bool) -> Result<Vec<(DecisionTree, Option<u64>)>> {
    let count_s = ln.field("trees")?;
    let count: usize = ln.parse(count_s, "tree count")?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let head = ln.field("tree")?;
        let (n_nodes, seed) = if seeded {
            let (n, s) = head
                .split_once(" seed ")
                .ok_or_else(|| ln.corrupt("forest tree needs a seed"))?;
            (n, Some(ln.parse::<u64>(s, "seed")?))
        } else {
            (head, None)
        };
        let n_nodes: usize = ln.parse(n_nodes, "node count")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let l = ln.next_line()?;
            let f: Vec<&str> = l.split(' ').collect();
            let node = match f.as_slice() {
                ["split", feat, thr, left, right, gain, cover] => {
                    let feature: usize = ln.parse(feat, "feature")?;
                    if feature >= p {
                        return Err(ln.corrupt(format!("feature {feature} outside schema of {p}")));
                    }
                    Node::Split {
                        feature,
                        threshold: ln.float(thr, "threshold")?,
                        left: ln.parse(left, "child")?,
                        right: ln.parse(right, "child")?,
                        gain: ln.float(gain, "gain")?,
                        cover: ln.float(cover, "cover")?,
                    }
                }
                ["leaf", value, cover] => Node::Leaf {
                    value: ln.float(value, "leaf value")?,
                    cover: ln.float(cover, "cover")?,
                },
                _ => return Err(ln.corrupt("expected a split or leaf node")),
            };
            nodes.push(node);
        }
        let tree = DecisionTree::from_nodes(nodes).map_err(|e| ln.corrupt(e))?;
        out.push((tree, seed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::dataset::{FeatureMatrix, FeatureSchema, LabelVector};
    use crate::models::{train, Model, ModelKind, ModelParams};

    fn toy() -> (FeatureMatrix, LabelVector) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64 * 0.37, ((i * 7) % 11) as f64 - 5.0, (i % 3) as f64])
            .collect();
        let y: Vec<u32> = (0..40).map(|i| u32::from(i % 5 < 2 || i > 30)).collect();
        let schema = FeatureSchema::new(vec!["a b".into(), "c".into(), "d".into()]).unwrap();
        let x = FeatureMatrix::from_rows(Arc::new(schema), &rows).unwrap();
        (x, LabelVector::binary(y).unwrap())
    }

    #[test]
    fn every_kind_reloads_identically() {
        let (x, y) = toy();
        let mut params = ModelParams::default();
        params.gbt.n_trees = 10;
        params.rf.n_trees = 5;
        for kind in ModelKind::PRIORITY {
            let m = train(kind, &x, &y, &params).unwrap();
            let text = serialize(&m);
            let back = deserialize(&text).unwrap();
            assert_eq!(back, m, "{kind}");
            for r in x.rows() {
                assert_eq!(back.predict_proba_row(r).to_bits(), m.predict_proba_row(r).to_bits());
            }
            assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let err = deserialize("explia-model v0\nkind gbt\n").unwrap_err();
        assert!(matches!(err, Error::Version { .. }));
    }

    #[test]
    fn truncation_reports_a_line() {
        let (x, y) = toy();
        let m = train(ModelKind::Gbt, &x, &y, &ModelParams::default()).unwrap();
        let text = serialize(&m);
        let cut: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        match deserialize(&cut).unwrap_err() {
            Error::Corrupt { line, .. } => assert_eq!(line, 13),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn out_of_schema_feature_is_rejected() {
        let (x, y) = toy();
        let m = train(ModelKind::Gbt, &x, &y, &ModelParams::default()).unwrap();
        let text = serialize(&m).replacen("split 0 ", "split 9 ", 1).replacen("split 1 ", "split 9 ", 1);
        assert!(matches!(deserialize(&text), Err(Error::Corrupt { .. })));
    }
}
