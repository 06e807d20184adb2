//! CART trees grown greedily, shared by the single tree, the forest and the
//! booster.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! values; rows with `value <= threshold` go left. Ties between equally good
//! splits keep the lowest feature index, then the lowest threshold, because
//! candidates are scanned in that order and only a strictly better score
//! replaces the incumbent.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::data::Dataset;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: Some(8),
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training rows of class 0 and 1 that reached this leaf.
        counts: [usize; 2],
        /// Class-1 probability for classification trees, additive score for
        /// boosting trees.
        value: f64,
    },
}

/// Gini impurity `1 − p₀² − p₁²` of a node with the given class counts.
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// How a node's rows are scored. Higher scores are better.
trait SplitRule {
    type Stats: Copy;
    type Score: Copy;
    fn empty(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn minus(&self, total: Self::Stats, part: Self::Stats) -> Self::Stats;
    fn node_score(&self, stats: Self::Stats, n: usize) -> Self::Score;
    fn split_score(&self, left: Self::Stats, nl: usize, right: Self::Stats, nr: usize) -> Self::Score;
    fn better(&self, a: Self::Score, b: Self::Score) -> bool;
    /// Whether the best split of a node is worth taking.
    fn accepts(&self, split: Self::Score, node: Self::Score) -> bool;
    fn pure(&self, stats: Self::Stats) -> bool;
    fn leaf_value(&self, rows: &[usize], counts: [usize; 2]) -> f64;
}

/// Gini in exact integer arithmetic. Minimizing the weighted child impurity
/// is the same as maximizing `Σ_children (c₀² + c₁²) / n_child`, kept here as
/// a fraction so ties are detected exactly.
struct GiniRule<'a> {
    labels: &'a [u8],
}

#[derive(Clone, Copy)]
struct Fraction {
    num: u128,
    den: u128,
}

impl SplitRule for GiniRule<'_> {
    type Stats = [u64; 2];
    type Score = Fraction;

    fn empty(&self) -> [u64; 2] {
        [0, 0]
    }
    fn add(&self, stats: &mut [u64; 2], row: usize) {
        stats[self.labels[row] as usize] += 1;
    }
    fn minus(&self, total: [u64; 2], part: [u64; 2]) -> [u64; 2] {
        [total[0] - part[0], total[1] - part[1]]
    }
    fn node_score(&self, s: [u64; 2], n: usize) -> Fraction {
        Fraction {
            num: (s[0] * s[0] + s[1] * s[1]) as u128,
            den: n as u128,
        }
    }
    fn split_score(&self, l: [u64; 2], nl: usize, r: [u64; 2], nr: usize) -> Fraction {
        let ql = (l[0] * l[0] + l[1] * l[1]) as u128;
        let qr = (r[0] * r[0] + r[1] * r[1]) as u128;
        Fraction {
            num: ql * nr as u128 + qr * nl as u128,
            den: nl as u128 * nr as u128,
        }
    }
    fn better(&self, a: Fraction, b: Fraction) -> bool {
        a.num * b.den > b.num * a.den
    }
    // Gini gain is never negative. Impure nodes also take zero-gain splits,
    // otherwise patterns like XOR could never be separated greedily.
    fn accepts(&self, split: Fraction, node: Fraction) -> bool {
        !self.better(node, split)
    }
    fn pure(&self, s: [u64; 2]) -> bool {
        s[0] == 0 || s[1] == 0
    }
    fn leaf_value(&self, _rows: &[usize], counts: [usize; 2]) -> f64 {
        counts[1] as f64 / (counts[0] + counts[1]) as f64
    }
}

/// Variance reduction on gradient targets; leaves take the Newton step
/// `Σ target / Σ hessian`.
struct NewtonRule<'a> {
    target: &'a [f64],
    hessian: &'a [f64],
}

const NEWTON_MIN_GAIN: f64 = 1e-12;

impl SplitRule for NewtonRule<'_> {
    type Stats = f64;
    type Score = f64;

    fn empty(&self) -> f64 {
        0.0
    }
    fn add(&self, stats: &mut f64, row: usize) {
        *stats += self.target[row];
    }
    fn minus(&self, total: f64, part: f64) -> f64 {
        total - part
    }
    fn node_score(&self, s: f64, n: usize) -> f64 {
        s * s / n as f64
    }
    fn split_score(&self, l: f64, nl: usize, r: f64, nr: usize) -> f64 {
        l * l / nl as f64 + r * r / nr as f64
    }
    fn better(&self, a: f64, b: f64) -> bool {
        a > b + NEWTON_MIN_GAIN * (1.0 + b.abs())
    }
    fn accepts(&self, split: f64, node: f64) -> bool {
        self.better(split, node)
    }
    fn pure(&self, _s: f64) -> bool {
        false
    }
    fn leaf_value(&self, rows: &[usize], _counts: [usize; 2]) -> f64 {
        let g: f64 = rows.iter().map(|&i| self.target[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hessian[i]).sum();
        g / h.max(1e-12)
    }
}

/// Random feature subsets per split, for forests.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut SeededRng,
    pub m_try: usize,
}

struct Grower<'a, R: SplitRule> {
    rule: R,
    features: &'a [f64],
    width: usize,
    labels: &'a [u8],
    params: &'a TreeParams,
    sampler: Option<FeatureSampler<'a>>,
    nodes: Vec<Node>,
}

impl<R: SplitRule> Grower<'_, R> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.width + feature]
    }

    fn leaf(&mut self, rows: &[usize], counts: [usize; 2]) -> usize {
        let value = self.rule.leaf_value(rows, counts);
        self.nodes.push(Node::Leaf { counts, value });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let ones = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let counts = [n - ones, ones];
        let mut total = self.rule.empty();
        for &r in rows.iter() {
            self.rule.add(&mut total, r);
        }
        let depth_exhausted = self.params.max_depth.is_some_and(|m| depth >= m);
        let min_leaf = self.params.min_leaf.max(1);
        if depth_exhausted || n < 2 * min_leaf || self.rule.pure(total) {
            return self.leaf(rows, counts);
        }

        let candidates: Vec<usize> = match self.sampler.as_mut() {
            Some(s) => {
                let mut f = sample(s.rng, self.width, s.m_try.min(self.width)).into_vec();
                f.sort_unstable();
                f
            }
            None => (0..self.width).collect(),
        };

        let mut best: Option<(usize, f64, R::Score)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &feature in &candidates {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.value(r, feature), r)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = self.rule.empty();
            for i in 0..n - 1 {
                self.rule.add(&mut left, sorted[i].1);
                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                if lo == hi {
                    continue;
                }
                let (nl, nr) = (i + 1, n - i - 1);
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let score = self.rule.split_score(left, nl, self.rule.minus(total, left), nr);
                if best.as_ref().is_none_or(|b| self.rule.better(score, b.2)) {
                    best = Some((feature, midpoint(lo, hi), score));
                }
            }
        }

        match best {
            Some((feature, threshold, score)) if self.rule.accepts(score, self.rule.node_score(total, n)) => {
                let split_at = partition(rows, |r| self.value(r, feature) <= threshold);
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    counts,
                    value: 0.0,
                });
                let (left_rows, right_rows) = rows.split_at_mut(split_at);
                let left = self.grow(left_rows, depth + 1);
                let right = self.grow(right_rows, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                id
            }
            _ => self.leaf(rows, counts),
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let k = yes.len();
    rows[..k].copy_from_slice(&yes);
    rows[k..].copy_from_slice(&no);
    k
}

/// A fitted tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Gini CART on every row of `train`.
    pub fn fit(train: &Dataset, params: &TreeParams) -> Result<Self, BaselineError> {
        if train.n_rows() == 0 {
            return Err(BaselineError::EmptyDataset);
        }
        let rows = (0..train.n_rows()).collect();
        Ok(Self::fit_classifier(train, rows, params, None))
    }

    pub(crate) fn fit_classifier(
        train: &Dataset,
        mut rows: Vec<usize>,
        params: &TreeParams,
        sampler: Option<FeatureSampler<'_>>,
    ) -> Self {
        let mut g = Grower {
            rule: GiniRule {
                labels: train.targets(),
            },
            features: train.features(),
            width: train.n_features(),
            labels: train.targets(),
            params,
            sampler,
            nodes: Vec::new(),
        };
        g.grow(&mut rows, 0);
        Self { nodes: g.nodes }
    }

    pub(crate) fn fit_newton(train: &Dataset, target: &[f64], hessian: &[f64], params: &TreeParams) -> Self {
        let mut rows: Vec<usize> = (0..train.n_rows()).collect();
        let mut g = Grower {
            rule: NewtonRule { target, hessian },
            features: train.features(),
            width: train.n_features(),
            labels: train.targets(),
            params,
            sampler: None,
            nodes: Vec::new(),
        };
        g.grow(&mut rows, 0);
        Self { nodes: g.nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf `row` is routed to.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return at,
            }
        }
    }

    fn leaf(&self, row: &[f64]) -> ([usize; 2], f64) {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { counts, value } => (counts, value),
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    /// Leaf value: class-1 probability, or the additive score of a boosting tree.
    pub fn value(&self, row: &[f64]) -> f64 {
        self.leaf(row).1
    }

    /// Majority class of the leaf; ties go to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let (counts, _) = self.leaf(row);
        u8::from(counts[1] > counts[0])
    }

    pub fn predict(&self, data: &Dataset) -> Vec<u8> {
        data.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[[f64; 2]], labels: &[u8]) -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into()],
            rows.iter().flatten().copied().collect(),
            labels.to_vec(),
        )
        .unwrap()
    }

    fn unlimited() -> TreeParams {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
        }
    }

    #[test]
    fn gini_endpoints() {
        assert_eq!(gini([5, 5]), 0.5);
        assert_eq!(gini([7, 0]), 0.0);
        assert_eq!(gini([0, 3]), 0.0);
    }

    #[test]
    fn pure_input_is_one_leaf() {
        let d = dataset(&[[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]], &[1, 1, 1]);
        let t = DecisionTree::fit(&d, &unlimited()).unwrap();
        assert_eq!(
            t.nodes(),
            &[Node::Leaf {
                counts: [0, 3],
                value: 1.0
            }]
        );
    }

    #[test]
    fn depth_two_tree_fits_xor() {
        let d = dataset(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], &[0, 1, 1, 0]);
        let params = TreeParams {
            max_depth: Some(2),
            min_leaf: 1,
        };
        let t = DecisionTree::fit(&d, &params).unwrap();
        assert_eq!(t.predict(&d), vec![0, 1, 1, 0]);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn xor_root_takes_zero_gain_split() {
        let d = dataset(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], &[0, 1, 1, 0]);
        let params = TreeParams {
            max_depth: Some(1),
            min_leaf: 1,
        };
        let t = DecisionTree::fit(&d, &params).unwrap();
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 0.5)),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn midpoint_threshold_and_tie_break() {
        // Both features separate perfectly; feature 0 wins the tie.
        let d = dataset(&[[1.0, 10.0], [2.0, 20.0], [4.0, 40.0], [5.0, 50.0]], &[0, 0, 1, 1]);
        let t = DecisionTree::fit(&d, &unlimited()).unwrap();
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 3.0);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn leaf_counts_match_routing() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i * 7 % 13) as f64, (i * 5 % 11) as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| ((i * 3 % 7) > 3) as u8).collect();
        let d = dataset(&rows, &labels);
        let t = DecisionTree::fit(&d, &TreeParams { max_depth: Some(3), min_leaf: 2 }).unwrap();
        let mut routed = vec![[0usize; 2]; t.nodes().len()];
        for (r, &y) in d.rows().zip(d.targets()) {
            routed[t.leaf_index(r)][y as usize] += 1;
        }
        for (i, node) in t.nodes().iter().enumerate() {
            if let Node::Leaf { counts, .. } = node {
                assert_eq!(*counts, routed[i]);
                assert!(counts[0] + counts[1] >= 2);
            }
        }
    }

    #[test]
    fn unlimited_depth_memorizes_consistent_data() {
        let rows: Vec<[f64; 2]> = (0..60).map(|i| [(i as f64 * 1.37).sin(), (i as f64 * 0.51).cos()]).collect();
        let labels: Vec<u8> = (0..60).map(|i| ((i * 7919) % 5 < 2) as u8).collect();
        let d = dataset(&rows, &labels);
        let t = DecisionTree::fit(&d, &unlimited()).unwrap();
        assert_eq!(t.predict(&d), labels);
    }
}
