use rand::seq::SliceRandom;

use crate::seed::Rng;

/// A node of a binary decision tree. Rows with `x[feature] <= threshold` go
/// left. `cover` is the hessian sum (boosting) or sample count (forest) that
/// reached the node; `gain` is the loss reduction of the split.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// Binary decision tree stored as a node table; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match *n {
                Node::Split { left, right, threshold, .. } => {
                    for c in [left, right] {
                        if c >= nodes.len() || c <= i {
                            return Err(format!("node {i} has invalid child {c}"));
                        }
                        parents[c] += 1;
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has a non-finite threshold"));
                    }
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(format!("leaf {i} has a non-finite value"));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err("node table is not a tree".into());
        }
        Ok(Self { nodes })
    }

    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    gain: 1.0,
                    cover: 2.0,
                },
                Node::Leaf { value: left, cover: 1.0 },
                Node::Leaf { value: right, cover: 1.0 },
            ],
        }
    }

    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, cover: 0.0 }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Adds each split's gain to `acc[feature]`.
    pub fn accumulate_gain(&self, acc: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = *n {
                acc[feature] += gain;
            }
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Midpoint threshold with `<=` semantics: rows at `lo` go left, rows at
/// `hi` go right, even when the midpoint rounds onto `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

/// Column-major copy of the training matrix with per-feature sort orders.
pub(crate) struct Presorted {
    pub n: usize,
    pub p: usize,
    /// `cols[f][r]` is row r of feature f.
    pub cols: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(rows: &[&[f64]], p: usize) -> Self {
        let n = rows.len();
        let cols: Vec<Vec<f64>> = (0..p).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..n as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Self { n, p, cols, order }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Second-order regression tree grown level by level with exact greedy
/// search over every distinct value boundary. Leaf weight is
/// `-G / (H + lambda)`; a split needs positive gain and `min_child_weight`
/// hessian on both sides. Ties go to the lowest feature index, then the
/// lowest threshold.
pub(crate) fn grow_newton(data: &Presorted, grad: &[f64], hess: &[f64], params: NewtonParams) -> DecisionTree {
    const NONE: u32 = u32::MAX;
    let n = data.n;
    let lambda = params.lambda;
    let score = |g: f64, h: f64| g * g / (h + lambda);

    let mut nodes: Vec<Node> = Vec::new();
    // (G, H) per node
    let mut stats: Vec<(f64, f64)> = Vec::new();
    let (g0, h0) = (grad.iter().sum::<f64>(), hess.iter().sum::<f64>());
    nodes.push(Node::Leaf {
        value: -g0 / (h0 + lambda),
        cover: h0,
    });
    stats.push((g0, h0));

    let mut node_of: Vec<u32> = vec![0; n];
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot_of: Vec<u32> = vec![NONE; nodes.len()];
        for (s, &nd) in frontier.iter().enumerate() {
            slot_of[nd] = s as u32;
        }
        let k = frontier.len();
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        let mut gl = vec![0.0; k];
        let mut hl = vec![0.0; k];
        let mut last = vec![0.0; k];
        let mut seen = vec![false; k];

        for f in 0..data.p {
            gl.iter_mut().for_each(|v| *v = 0.0);
            hl.iter_mut().for_each(|v| *v = 0.0);
            seen.iter_mut().for_each(|v| *v = false);
            let col = &data.cols[f];
            for &r in &data.order[f] {
                let r = r as usize;
                let nd = node_of[r];
                if nd == NONE {
                    continue;
                }
                let s = slot_of[nd as usize];
                if s == NONE {
                    continue;
                }
                let s = s as usize;
                let v = col[r];
                if seen[s] && v != last[s] {
                    let (g, h) = stats[frontier[s]];
                    let (glv, hlv) = (gl[s], hl[s]);
                    let (grv, hrv) = (g - glv, h - hlv);
                    if hlv >= params.min_child_weight && hrv >= params.min_child_weight {
                        let gain = 0.5 * (score(glv, hlv) + score(grv, hrv) - score(g, h));
                        if gain > 0.0 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: midpoint(last[s], v),
                            });
                        }
                    }
                }
                gl[s] += grad[r];
                hl[s] += hess[r];
                last[s] = v;
                seen[s] = true;
            }
        }

        let mut next = Vec::new();
        let mut children: Vec<Option<(usize, usize)>> = vec![None; k];
        for (s, b) in best.iter().enumerate() {
            let Some(c) = b else { continue };
            let nd = frontier[s];
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
            nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
            stats.push((0.0, 0.0));
            stats.push((0.0, 0.0));
            nodes[nd] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: l,
                right: r,
                gain: c.gain,
                cover: stats[nd].1,
            };
            children[s] = Some((l, r));
            next.push(l);
            next.push(r);
        }
        for r in 0..n {
            let nd = node_of[r];
            if nd == NONE {
                continue;
            }
            let s = slot_of[nd as usize];
            if s == NONE {
                continue;
            }
            match (children[s as usize], &nodes[nd as usize]) {
                (Some((l, rr)), Node::Split { feature, threshold, .. }) => {
                    let c = if data.cols[*feature][r] <= *threshold { l } else { rr };
                    node_of[r] = c as u32;
                    stats[c].0 += grad[r];
                    stats[c].1 += hess[r];
                }
                _ => node_of[r] = NONE,
            }
        }
        for &c in &next {
            let (g, h) = stats[c];
            nodes[c] = Node::Leaf {
                value: -g / (h + lambda),
                cover: h,
            };
        }
        frontier = next;
    }
    DecisionTree { nodes }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GiniParams {
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

fn gini_impurity(n1: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = n1 / n;
    2.0 * p * (1.0 - p)
}

/// Classification tree on binary labels with the Gini criterion. `sample`
/// lists training row indices (repeats allowed, as in a bootstrap). Each
/// split examines features in a seeded random order until `max_features`
/// non-constant ones have been scored. Leaves hold the class-1 fraction.
pub(crate) fn grow_gini(rows: &[&[f64]], y: &[u8], sample: &[usize], params: GiniParams, rng: &mut Rng) -> DecisionTree {
    let p = rows.first().map_or(0, |r| r.len());
    let mut nodes = Vec::new();
    let mut feats: Vec<usize> = (0..p).collect();
    let mut buf: Vec<(f64, u8)> = Vec::with_capacity(sample.len());
    // explicit stack of (node index, rows, depth)
    nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
    let mut stack = vec![(0usize, sample.to_vec(), 0usize)];
    while let Some((id, idx, depth)) = stack.pop() {
        let n = idx.len() as f64;
        let n1 = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
        let leaf = Node::Leaf {
            value: if n > 0.0 { n1 / n } else { 0.0 },
            cover: n,
        };
        let pure = n1 == 0.0 || n1 == n;
        let too_small = idx.len() < 2 * params.min_samples_leaf;
        let too_deep = params.max_depth.is_some_and(|d| depth >= d);
        if pure || too_small || too_deep {
            nodes[id] = leaf;
            continue;
        }
        let parent = n * gini_impurity(n1, n);
        let mut best: Option<Candidate> = None;
        feats.shuffle(rng);
        let mut scored = 0;
        for &f in &feats {
            if scored >= params.max_features {
                break;
            }
            buf.clear();
            buf.extend(idx.iter().map(|&i| (rows[i][f], y[i])));
            buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            if buf[0].0 == buf[buf.len() - 1].0 {
                continue;
            }
            scored += 1;
            let mut l1 = 0.0;
            for i in 0..buf.len() - 1 {
                l1 += f64::from(buf[i].1);
                if buf[i].0 == buf[i + 1].0 {
                    continue;
                }
                let nl = (i + 1) as f64;
                if (i + 1) < params.min_samples_leaf || buf.len() - (i + 1) < params.min_samples_leaf {
                    continue;
                }
                let nr = n - nl;
                let gain = parent - nl * gini_impurity(l1, nl) - nr * gini_impurity(n1 - l1, nr);
                let better = match best {
                    None => true,
                    Some(b) => gain > b.gain || (gain == b.gain && f < b.feature),
                };
                if better {
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold: midpoint(buf[i].0, buf[i + 1].0),
                    });
                }
            }
        }
        let Some(c) = best else {
            nodes[id] = leaf;
            continue;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][c.feature] <= c.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        nodes[id] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: l,
            right: r,
            gain: c.gain.max(0.0),
            cover: n,
        };
        stack.push((r, ri, depth + 1));
        stack.push((l, li, depth + 1));
    }
    DecisionTree { nodes }
}
