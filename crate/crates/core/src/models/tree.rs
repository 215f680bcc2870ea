//! Binary decision trees and a level-wise grower shared by the forest and
//! the booster.
//!
//! Rows are presorted once per feature. Each level is grown by one pass over
//! every feature's sorted order, accumulating left-hand statistics for all
//! open nodes at once.

use serde::{Deserialize, Serialize};

/// Gains at or below this are treated as no improvement.
pub(crate) const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        cover: f64,
    },
    Leaf { values: Vec<f64>, cover: f64 },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Nodes in creation order; the root is node 0 and children always come
/// after their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(values: Vec<f64>, cover: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { values, cover }],
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { values, .. } => values,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.nodes
            .iter()
            .find_map(|n| match n {
                Node::Leaf { values, .. } => Some(values.len()),
                Node::Split { .. } => None,
            })
            .unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    /// `(feature, gain)` for every split node.
    pub fn split_gains(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let outputs = self.n_outputs();
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= n_features {
                        return Err(format!("node {i} splits on feature {feature} of {n_features}"));
                    }
                    if threshold.is_nan() {
                        return Err(format!("node {i} has a NaN threshold"));
                    }
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(format!("node {i} has invalid children {left}, {right}"));
                    }
                }
                Node::Leaf { values, .. } => {
                    if values.len() != outputs || values.iter().any(|v| !v.is_finite()) {
                        return Err(format!("leaf {i} has invalid values"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Column-major training features with per-feature sort orders. In
/// histogram mode the columns hold bin indices and `edges` maps them back
/// to raw thresholds.
pub(crate) struct FeatureIndex {
    values: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    edges: Option<Vec<Vec<f64>>>,
    n_rows: usize,
}

impl FeatureIndex {
    pub fn exact(rows: &[Vec<f64>]) -> Self {
        let values = columns(rows);
        Self::from_columns(values, None, rows.len())
    }

    pub fn histogram(rows: &[Vec<f64>], max_bins: usize) -> Self {
        let raw = columns(rows);
        let edges: Vec<Vec<f64>> = raw.iter().map(|c| bin_edges(c, max_bins)).collect();
        let values = raw
            .iter()
            .zip(&edges)
            .map(|(c, e)| c.iter().map(|&x| e.partition_point(|&edge| edge <= x) as f64).collect())
            .collect();
        Self::from_columns(values, Some(edges), rows.len())
    }

    fn from_columns(values: Vec<Vec<f64>>, edges: Option<Vec<Vec<f64>>>, n_rows: usize) -> Self {
        let order = values
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..n_rows as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Self {
            values,
            order,
            edges,
            n_rows,
        }
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Raw-space threshold separating index-space values `lo < hi`.
    fn threshold(&self, feature: usize, lo: f64, hi: f64) -> f64 {
        match &self.edges {
            Some(edges) => edges[feature][lo as usize],
            None => {
                let mid = lo + (hi - lo) / 2.0;
                if mid > lo {
                    mid
                } else {
                    hi
                }
            }
        }
    }
}

fn columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let f = rows.first().map_or(0, Vec::len);
    (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Cut points for at most `max_bins` bins. With few distinct values these
/// are the midpoints between them; otherwise midpoints around quantiles.
fn bin_edges(column: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let midpoint = |a: f64, b: f64| {
        let m = a + (b - a) / 2.0;
        if m > a {
            m
        } else {
            b
        }
    };
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for b in 1..max_bins {
        let q = sorted[b * n / max_bins];
        // the largest value below q, so that q opens a new bin
        let i = distinct.partition_point(|&v| v < q);
        if i == 0 {
            continue;
        }
        let e = midpoint(distinct[i - 1], q);
        if edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    edges
}

/// Impurity bookkeeping for one growing task.
pub(crate) trait Criterion: Sync {
    type Stats: Clone + Send;

    fn empty(&self) -> Self::Stats;
    /// Adds row `row`; rows with zero weight are never passed.
    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn diff(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    /// `None` when a child would violate a size constraint.
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats) -> Option<f64>;
    fn leaf_values(&self, stats: &Self::Stats) -> Vec<f64>;
    fn cover(&self, stats: &Self::Stats) -> f64;
    fn weight(&self, row: usize) -> f64;
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
}

struct Open<S> {
    node: usize,
    stats: S,
    allowed: Option<Vec<bool>>,
}

struct Candidate<S> {
    gain: f64,
    feature: usize,
    left_value: f64,
    right_value: f64,
    left: S,
}

const NONE: u32 = u32::MAX;

/// Grows one tree. `sample_features` is called once per node in creation
/// order and returns the features it may split on (`None` for all).
pub(crate) fn grow<C: Criterion>(
    index: &FeatureIndex,
    criterion: &C,
    params: &GrowParams,
    mut sample_features: impl FnMut() -> Option<Vec<bool>>,
) -> Tree {
    let n = index.n_rows();
    let mut node_of = vec![NONE; n];
    let mut root_stats = criterion.empty();
    for (r, slot) in node_of.iter_mut().enumerate() {
        if criterion.weight(r) > 0.0 {
            criterion.add(&mut root_stats, r);
            *slot = 0;
        }
    }
    let mut nodes = vec![Node::Leaf {
        values: Vec::new(),
        cover: 0.0,
    }];
    let mut open = vec![Open {
        node: 0,
        stats: root_stats,
        allowed: sample_features(),
    }];

    for depth in 0..=params.max_depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate<C::Stats>>> = (0..open.len()).map(|_| None).collect();
        if depth < params.max_depth {
            for f in 0..index.n_features() {
                let col = &index.values[f];
                let mut left: Vec<C::Stats> = (0..open.len()).map(|_| criterion.empty()).collect();
                let mut last: Vec<Option<f64>> = vec![None; open.len()];
                for &r in &index.order[f] {
                    let r = r as usize;
                    let o = node_of[r];
                    if o == NONE {
                        continue;
                    }
                    let o = o as usize;
                    if open[o].allowed.as_ref().is_some_and(|a| !a[f]) {
                        continue;
                    }
                    let v = col[r];
                    if let Some(prev) = last[o] {
                        if v > prev {
                            if let Some(g) = criterion.gain(&open[o].stats, &left[o]) {
                                if g > GAIN_EPS && best[o].as_ref().is_none_or(|b| g > b.gain) {
                                    best[o] = Some(Candidate {
                                        gain: g,
                                        feature: f,
                                        left_value: prev,
                                        right_value: v,
                                        left: left[o].clone(),
                                    });
                                }
                            }
                        }
                    }
                    criterion.add(&mut left[o], r);
                    last[o] = Some(v);
                }
            }
        }

        // open index -> (left open index, right open index) in the next level
        let mut next: Vec<Open<C::Stats>> = Vec::new();
        let mut routes: Vec<Option<(usize, f64, u32, u32)>> = Vec::with_capacity(open.len());
        for (o, cand) in open.iter().zip(best) {
            let cover = criterion.cover(&o.stats);
            match cand {
                Some(c) => {
                    let right_stats = criterion.diff(&o.stats, &c.left);
                    let l = nodes.len();
                    nodes.push(Node::Leaf { values: Vec::new(), cover: 0.0 });
                    nodes.push(Node::Leaf { values: Vec::new(), cover: 0.0 });
                    nodes[o.node] = Node::Split {
                        feature: c.feature,
                        threshold: index.threshold(c.feature, c.left_value, c.right_value),
                        left: l,
                        right: l + 1,
                        gain: c.gain,
                        cover,
                    };
                    let li = next.len() as u32;
                    next.push(Open { node: l, stats: c.left, allowed: sample_features() });
                    next.push(Open { node: l + 1, stats: right_stats, allowed: sample_features() });
                    routes.push(Some((c.feature, c.left_value, li, li + 1)));
                }
                None => {
                    nodes[o.node] = Node::Leaf {
                        values: criterion.leaf_values(&o.stats),
                        cover,
                    };
                    routes.push(None);
                }
            }
        }
        for (r, slot) in node_of.iter_mut().enumerate() {
            if *slot == NONE {
                continue;
            }
            *slot = match routes[*slot as usize] {
                Some((f, left_value, l, rgt)) => {
                    if index.values[f][r] <= left_value {
                        l
                    } else {
                        rgt
                    }
                }
                None => NONE,
            };
        }
        open = next;
    }
    Tree { nodes }
}

/// Second-order boosting statistics: sums of gradients and hessians.
pub(crate) struct GradientCriterion<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl GradientCriterion<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.lambda)
    }
}

impl Criterion for GradientCriterion<'_> {
    type Stats = (f64, f64);

    fn empty(&self) -> Self::Stats {
        (0.0, 0.0)
    }

    fn add(&self, s: &mut Self::Stats, row: usize) {
        s.0 += self.grad[row];
        s.1 += self.hess[row];
    }

    fn diff(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats {
        (total.0 - part.0, total.1 - part.1)
    }

    fn gain(&self, parent: &Self::Stats, left: &Self::Stats) -> Option<f64> {
        let right = self.diff(parent, left);
        if left.1 < self.min_child_weight || right.1 < self.min_child_weight {
            return None;
        }
        Some(
            0.5 * (self.score(left.0, left.1) + self.score(right.0, right.1) - self.score(parent.0, parent.1))
                - self.gamma,
        )
    }

    fn leaf_values(&self, s: &Self::Stats) -> Vec<f64> {
        vec![-s.0 / (s.1 + self.lambda)]
    }

    fn cover(&self, s: &Self::Stats) -> f64 {
        s.1
    }

    fn weight(&self, _row: usize) -> f64 {
        1.0
    }
}

/// Weighted class counts with Gini impurity.
pub(crate) struct GiniCriterion<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
    pub min_leaf: f64,
}

#[derive(Clone)]
pub(crate) struct ClassCounts {
    counts: Vec<f64>,
    total: f64,
}

impl ClassCounts {
    fn purity(&self) -> f64 {
        if self.total <= 0.0 {
            0.0
        } else {
            self.counts.iter().map(|c| c * c).sum::<f64>() / self.total
        }
    }
}

impl Criterion for GiniCriterion<'_> {
    type Stats = ClassCounts;

    fn empty(&self) -> Self::Stats {
        ClassCounts {
            counts: vec![0.0; self.n_classes],
            total: 0.0,
        }
    }

    fn add(&self, s: &mut Self::Stats, row: usize) {
        let w = self.weights[row];
        s.counts[self.labels[row]] += w;
        s.total += w;
    }

    fn diff(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats {
        ClassCounts {
            counts: total.counts.iter().zip(&part.counts).map(|(a, b)| a - b).collect(),
            total: total.total - part.total,
        }
    }

    /// Decrease in weighted Gini impurity, `N·G(P) − N_L·G(L) − N_R·G(R)`.
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats) -> Option<f64> {
        let right_total = parent.total - left.total;
        if left.total < self.min_leaf || right_total < self.min_leaf {
            return None;
        }
        let right_purity = parent
            .counts
            .iter()
            .zip(&left.counts)
            .map(|(p, l)| (p - l) * (p - l))
            .sum::<f64>()
            / right_total;
        Some(left.purity() + right_purity - parent.purity())
    }

    /// One-hot vote for the majority class, lowest class on ties.
    fn leaf_values(&self, s: &Self::Stats) -> Vec<f64> {
        let mut best = 0;
        for (c, &v) in s.counts.iter().enumerate() {
            if v > s.counts[best] {
                best = c;
            }
        }
        let mut out = vec![0.0; self.n_classes];
        out[best] = 1.0;
        out
    }

    fn cover(&self, s: &Self::Stats) -> f64 {
        s.total
    }

    fn weight(&self, row: usize) -> f64 {
        self.weights[row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_on_separable_feature() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let grad: Vec<f64> = (0..10).map(|i| if i < 4 { -1.0 } else { 1.0 }).collect();
        let hess = vec![1.0; 10];
        let crit = GradientCriterion {
            grad: &grad,
            hess: &hess,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        };
        let index = FeatureIndex::exact(&rows);
        let tree = grow(&index, &crit, &GrowParams { max_depth: 1 }, || None);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, gain, cover, .. } => {
                assert_eq!(*feature, 1);
                assert_eq!(*threshold, 3.5);
                // ½(16/4 + 36/6 − 4/10)
                assert!((gain - 0.5 * (4.0 + 6.0 - 0.4)).abs() < 1e-12);
                assert_eq!(*cover, 10.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict(&[1.0, 0.0]), &[1.0]);
        assert_eq!(tree.predict(&[1.0, 9.0]), &[-1.0]);
        tree.validate(2).unwrap();
    }

    #[test]
    fn ties_prefer_lowest_feature_then_threshold() {
        // features 0 and 1 are identical; both split points 0|1 and 2|3 of
        // the symmetric gradient give the same gain
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, i as f64]).collect();
        let grad = vec![-1.0, 1.0, 1.0, -1.0];
        let hess = vec![1.0; 4];
        let crit = GradientCriterion {
            grad: &grad,
            hess: &hess,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        };
        let tree = grow(&FeatureIndex::exact(&rows), &crit, &GrowParams { max_depth: 1 }, || None);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn histogram_edges_partition_values() {
        let col: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let edges = bin_edges(&col, 16);
        assert!(edges.len() <= 15 && edges.len() >= 10);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let few = bin_edges(&[1.0, 1.0, 2.0, 4.0], 256);
        assert_eq!(few, vec![1.5, 3.0]);
    }

    #[test]
    fn histogram_thresholds_route_like_training() {
        let rows: Vec<Vec<f64>> = (0..600).map(|i| vec![((i * 37) % 600) as f64 / 7.0]).collect();
        let grad: Vec<f64> = rows.iter().map(|r| if r[0] < 40.0 { -1.0 } else { 1.0 }).collect();
        let hess = vec![1.0; rows.len()];
        let crit = GradientCriterion {
            grad: &grad,
            hess: &hess,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        };
        let index = FeatureIndex::histogram(&rows, 32);
        let tree = grow(&index, &crit, &GrowParams { max_depth: 3 }, || None);
        tree.validate(1).unwrap();
        // training rows land in leaves whose sign matches their gradient
        let agree = rows
            .iter()
            .zip(&grad)
            .filter(|(r, g)| tree.predict(r)[0] * **g < 0.0)
            .count();
        assert!(agree as f64 > 0.95 * rows.len() as f64, "{agree}");
    }

    #[test]
    fn gini_respects_min_leaf_and_weights() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let mut weights = vec![1.0; 8];
        weights[7] = 0.0;
        let crit = GiniCriterion {
            labels: &labels,
            weights: &weights,
            n_classes: 2,
            min_leaf: 2.0,
        };
        let tree = grow(&FeatureIndex::exact(&rows), &crit, &GrowParams { max_depth: 4 }, || None);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.nodes[0].cover(), 7.0);
        assert_eq!(tree.predict(&[6.0]), &[0.0, 1.0]);
        let no_room = GiniCriterion { min_leaf: 5.0, ..crit };
        let stump = grow(&FeatureIndex::exact(&rows), &no_room, &GrowParams { max_depth: 4 }, || None);
        assert_eq!(stump.nodes.len(), 1);
        assert_eq!(stump.predict(&[0.0]), &[1.0, 0.0]);
    }
}
