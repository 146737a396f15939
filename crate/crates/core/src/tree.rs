//! Weighted least-squares regression trees with `J` terminal nodes.
//!
//! The split criterion is the weighted squared-error reduction written in
//! grouped-sum form,
//!
//! ```text
//! gain = (Σzw)_L² / (Σw)_L + (Σzw)_R² / (Σw)_R − (Σzw)_T² / (Σw)_T
//! ```
//!
//! which never divides by a single sample's weight. With the logit working
//! response `z = (r − p) / (p(1 − p))` and weight `w = p(1 − p)` the products
//! `zw` are just `r − p`, so callers pass `z` and `w` such that `z * w` is the
//! quantity to be summed. With `w ≡ 1` the same routine gives the gradient
//! (mart) criterion.
//!
//! Trees grow best-first: the open leaf whose best split has the largest gain
//! is split until there are `J` leaves or no leaf has a positive-gain split.
//! Samples are kept in per-feature sorted order inside each leaf so a split
//! search over a leaf is a single prefix scan per feature.

use crate::data::{Dataset, FeatureColumnIndex};
use crate::error::{Error, Result};

/// Weighted-mean denominators below this give a zero leaf value.
pub const LEAF_DENOMINATOR_FLOOR: f64 = 1e-12;

/// A split is only accepted when its gain exceeds this fraction of the
/// children's explained sum of squares; anything smaller is rounding noise.
pub const GAIN_NOISE_FLOOR: f64 = 1e-10;

/// Gains within this relative distance count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

/// Response and weight of one sample for a single tree fit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WorkingSample {
    /// The quantity whose weighted sum is taken is `z * w`; callers usually
    /// store that product directly in `zw`.
    pub zw: f64,
    pub w: f64,
}

impl WorkingSample {
    pub fn new(zw: f64, w: f64) -> Self {
        WorkingSample { zw, w }
    }

    /// From a response and weight given separately.
    pub fn from_response(z: f64, w: f64) -> Self {
        WorkingSample { zw: z * w, w }
    }
}

/// Weighted squared-error reduction of a two-way split, or `None` when
/// either side has no positive weight.
pub fn gain_from_sums(sum_zw_left: f64, sum_w_left: f64, sum_zw_right: f64, sum_w_right: f64) -> Option<f64> {
    if !(sum_w_left > 0.0 && sum_w_right > 0.0) {
        return None;
    }
    let total = sum_zw_left + sum_zw_right;
    let parent = total * total / (sum_w_left + sum_w_right);
    Some(children_term(sum_zw_left, sum_w_left, sum_zw_right, sum_w_right) - parent)
}

#[inline]
fn children_term(l: f64, wl: f64, r: f64, wr: f64) -> f64 {
    l * l / wl + r * r / wr
}

/// Leaf value `scale * Σzw / Σw`, zero when the weight sum is degenerate.
pub fn leaf_value(sum_zw: f64, sum_w: f64, scale: f64) -> f64 {
    if sum_w < LEAF_DENOMINATOR_FLOOR {
        0.0
    } else {
        scale * sum_zw / sum_w
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SplitCandidate {
    /// Strictly better, treating gains within [`GAIN_TIE_TOLERANCE`] as equal.
    fn beats(&self, other: &SplitCandidate) -> bool {
        beats(self.gain, other.gain)
    }
}

#[inline]
fn beats(gain: f64, incumbent: f64) -> bool {
    gain > incumbent + GAIN_TIE_TOLERANCE * incumbent.abs()
}

/// Midpoint between adjacent distinct values, falling back to the lower
/// value when the midpoint is not representable strictly below `hi`.
fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mut mid = lo + (hi - lo) * 0.5;
    if !mid.is_finite() {
        mid = lo * 0.5 + hi * 0.5;
    }
    if mid.is_finite() && mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Best admissible split of one feature.
///
/// `run` lists the node's samples in ascending order of `values` (the full
/// feature column indexed by sample). Splits fall only between distinct
/// values, leave at least `min_leaf` samples and positive weight on each
/// side, and must have gain above the noise floor. Ties keep the smaller
/// threshold.
pub fn find_best_split_in_column(
    feature: usize,
    run: &[u32],
    values: &[f64],
    samples: &[WorkingSample],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let (total_zw, total_w) = run.iter().fold((0.0, 0.0), |(a, b), &i| {
        let s = samples[i as usize];
        (a + s.zw, b + s.w)
    });
    scan_column(feature, run, values, samples, min_leaf.max(1), total_zw, total_w).map(|s| s.0)
}

/// Returns the candidate and its split position within `run`.
fn scan_column(
    feature: usize,
    run: &[u32],
    values: &[f64],
    samples: &[WorkingSample],
    min_leaf: usize,
    total_zw: f64,
    total_w: f64,
) -> Option<(SplitCandidate, usize)> {
    let n = run.len();
    if n < 2 * min_leaf {
        return None;
    }
    let parent = if total_w > 0.0 { total_zw * total_zw / total_w } else { 0.0 };
    let mut best: Option<(SplitCandidate, usize)> = None;
    let mut left_zw = 0.0;
    let mut left_w = 0.0;
    let last = n - min_leaf;
    let mut i = run[0] as usize;
    let mut next_value = values[i];
    for pos in 0..last {
        let s = samples[i];
        left_zw += s.zw;
        left_w += s.w;
        i = run[pos + 1] as usize;
        let lo = next_value;
        let hi = values[i];
        next_value = hi;
        let left_count = pos + 1;
        // most positions in integer-valued features sit inside tie runs
        if !(lo < hi) || left_count < min_leaf {
            continue;
        }
        let right_zw = total_zw - left_zw;
        let right_w = total_w - left_w;
        if !(left_w > 0.0 && right_w > 0.0) {
            continue;
        }
        let explained = children_term(left_zw, left_w, right_zw, right_w);
        let gain = explained - parent;
        if !(gain > GAIN_NOISE_FLOOR * explained) {
            continue;
        }
        if best.as_ref().is_some_and(|(b, _)| !beats(gain, b.gain)) {
            continue;
        }
        best = Some((
            SplitCandidate {
                feature,
                threshold: split_threshold(lo, hi),
                gain,
                left_count,
                right_count: n - left_count,
            },
            left_count,
        ));
    }
    best
}

/// Best split over all features of a node. `runs[d]` holds the node's
/// samples sorted by feature `d`; all runs contain the same samples.
pub fn find_best_split(
    dataset: &Dataset,
    runs: &[&[u32]],
    samples: &[WorkingSample],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let first = runs.first()?;
    let (total_zw, total_w) = first.iter().fold((0.0, 0.0), |(a, b), &i| {
        let s = samples[i as usize];
        (a + s.zw, b + s.w)
    });
    best_over_features(dataset, runs.iter().copied().enumerate(), samples, min_leaf.max(1), total_zw, total_w)
        .map(|s| s.0)
}

fn best_over_features<'r>(
    dataset: &Dataset,
    runs: impl Iterator<Item = (usize, &'r [u32])>,
    samples: &[WorkingSample],
    min_leaf: usize,
    total_zw: f64,
    total_w: f64,
) -> Option<(SplitCandidate, usize)> {
    let mut best: Option<(SplitCandidate, usize)> = None;
    for (d, run) in runs {
        if let Some(cand) = scan_column(d, run, dataset.column(d), samples, min_leaf, total_zw, total_w) {
            if best.as_ref().map_or(true, |b| cand.0.beats(&b.0)) {
                best = Some(cand);
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn single_leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Validates that `nodes` forms a tree rooted at 0 in which every node is
    /// reachable exactly once.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if seen[id] {
                return Err(Error::InvalidArgument(format!("node {id} reached twice")));
            }
            seen[id] = true;
            match nodes[id] {
                Node::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if left >= nodes.len() || right >= nodes.len() {
                        return Err(Error::InvalidArgument(format!("node {id} has a dangling child")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidArgument(format!("node {id} has a non-finite threshold")));
                    }
                    stack.push(right);
                    stack.push(left);
                }
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidArgument(format!("leaf {id} has a non-finite value")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("tree has unreachable nodes".into()));
        }
        Ok(RegressionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Largest feature index used by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn set_leaf_value(&mut self, node: usize, value: f64) {
        match &mut self.nodes[node] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    /// Same structure with every leaf value negated.
    pub fn negated(&self) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { value } => Node::Leaf { value: -value },
                split => split,
            })
            .collect();
        RegressionTree { nodes }
    }

    /// Index of the leaf reached by a sample whose feature `d` is `get(d)`.
    #[inline]
    pub fn leaf_for(&self, get: impl Fn(usize) -> f64) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if get(feature) <= threshold { left } else { right },
                Node::Leaf { .. } => return id,
            }
        }
    }

    #[inline]
    pub fn predict_with(&self, get: impl Fn(usize) -> f64) -> f64 {
        match self.nodes[self.leaf_for(get)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Value of the leaf that `x` falls into.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(f) = self.max_feature() {
            if f >= x.len() {
                return Err(Error::DimensionMismatch {
                    expected: f + 1,
                    actual: x.len(),
                });
            }
        }
        Ok(self.predict_with(|d| x[d]))
    }

    /// Node ids in preorder (node, left subtree, right subtree).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

/// Training samples that ended in one leaf, with their sums.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafRegion {
    pub node: usize,
    pub samples: Vec<u32>,
    pub sum_zw: f64,
    pub sum_w: f64,
}

/// Output of [`build_tree`]: the tree shape (leaf values all zero) and the
/// training region of every leaf. Leaf values are the caller's to assign.
#[derive(Clone, Debug)]
pub struct GrownTree {
    pub tree: RegressionTree,
    pub regions: Vec<LeafRegion>,
}

impl GrownTree {
    /// Sets every leaf's value and returns the tree.
    pub fn assign(mut self, mut value: impl FnMut(&LeafRegion) -> f64) -> (RegressionTree, Vec<LeafRegion>) {
        for region in &self.regions {
            let v = value(region);
            self.tree.set_leaf_value(region.node, v);
        }
        (self.tree, self.regions)
    }
}

struct OpenLeaf {
    node: usize,
    start: usize,
    end: usize,
    sum_zw: f64,
    sum_w: f64,
    best: Option<(SplitCandidate, usize)>,
}

/// Grows a tree with at most `max_leaves` leaves over all samples of `dataset`.
pub fn build_tree(
    dataset: &Dataset,
    index: &FeatureColumnIndex,
    samples: &[WorkingSample],
    max_leaves: usize,
    min_leaf: usize,
) -> GrownTree {
    let n = dataset.n_samples();
    let n_features = dataset.n_features();
    assert_eq!(samples.len(), n, "one working sample per training sample");
    assert_eq!(index.n_samples(), n, "index built for a different dataset");
    let min_leaf = min_leaf.max(1);

    let mut order = Vec::with_capacity(n * n_features);
    for d in 0..n_features {
        order.extend_from_slice(index.permutation(d));
    }
    let mut goes_left = vec![false; n];
    let mut scratch = vec![0u32; n];

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaves = vec![open_leaf(dataset, &order, samples, min_leaf, 0, 0, n)];

    while leaves.len() < max_leaves {
        let mut pick: Option<usize> = None;
        for (li, leaf) in leaves.iter().enumerate() {
            if let Some((cand, _)) = &leaf.best {
                let better = match pick {
                    None => true,
                    Some(p) => cand.beats(&leaves[p].best.as_ref().unwrap().0),
                };
                if better {
                    pick = Some(li);
                }
            }
        }
        let Some(li) = pick else { break };
        let leaf = leaves.swap_remove(li);
        let (cand, left_len) = leaf.best.expect("picked leaf has a split");
        let mid = leaf.start + left_len;

        let f = cand.feature;
        for &i in &order[f * n + leaf.start..f * n + leaf.end] {
            goes_left[i as usize] = false;
        }
        for &i in &order[f * n + leaf.start..f * n + mid] {
            goes_left[i as usize] = true;
        }
        for d in (0..n_features).filter(|&d| d != f) {
            let range = &mut order[d * n + leaf.start..d * n + leaf.end];
            // branch-free stable partition; the left write never passes the read
            let (mut wl, mut wr) = (0, 0);
            for r in 0..range.len() {
                let i = range[r];
                let left = goes_left[i as usize];
                range[wl] = i;
                scratch[wr] = i;
                wl += usize::from(left);
                wr += usize::from(!left);
            }
            range[wl..].copy_from_slice(&scratch[..wr]);
        }

        let left_node = nodes.len();
        let right_node = left_node + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: f,
            threshold: cand.threshold,
            left: left_node,
            right: right_node,
        };
        leaves.push(open_leaf(dataset, &order, samples, min_leaf, left_node, leaf.start, mid));
        leaves.push(open_leaf(dataset, &order, samples, min_leaf, right_node, mid, leaf.end));
    }

    leaves.sort_by_key(|l| l.node);
    let regions = leaves
        .into_iter()
        .map(|l| LeafRegion {
            node: l.node,
            samples: order[l.start..l.end].to_vec(),
            sum_zw: l.sum_zw,
            sum_w: l.sum_w,
        })
        .collect();
    GrownTree {
        tree: RegressionTree { nodes },
        regions,
    }
}

fn open_leaf(
    dataset: &Dataset,
    order: &[u32],
    samples: &[WorkingSample],
    min_leaf: usize,
    node: usize,
    start: usize,
    end: usize,
) -> OpenLeaf {
    let n = dataset.n_samples();
    let (sum_zw, sum_w) = order[start..end].iter().fold((0.0, 0.0), |(a, b), &i| {
        let s = samples[i as usize];
        (a + s.zw, b + s.w)
    });
    let runs = (0..dataset.n_features()).map(|d| (d, &order[d * n + start..d * n + end]));
    let best = best_over_features(dataset, runs, samples, min_leaf, sum_zw, sum_w);
    OpenLeaf {
        node,
        start,
        end,
        sum_zw,
        sum_w,
        best,
    }
}
