//! CART classification trees grown by greedy Gini-impurity reduction.
//!
//! Nodes live in a flat arena (`nodes[0]` is the root) so that leaf and
//! split identifiers are plain indices. Routing is fixed: `x[feature] <=
//! threshold` goes left, everything else goes right.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many candidate features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl Serialize for MaxFeatures {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxFeatures::All => s.serialize_str("all"),
            MaxFeatures::Sqrt => s.serialize_str("sqrt"),
            MaxFeatures::Count(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Count(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) if k > 0 => Ok(MaxFeatures::Count(k as usize)),
            Raw::Count(_) => Err(serde::de::Error::custom("max_features must be positive")),
            Raw::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Count(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            other => match other.parse::<usize>() {
                Ok(k) if k > 0 => Ok(MaxFeatures::Count(k)),
                _ => Err(format!("invalid max_features `{other}`")),
            },
        }
    }
}

/// Depth limit; `None` grows until purity or `min_samples_leaf` stops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaxDepth(pub Option<usize>);

impl MaxDepth {
    pub const UNLIMITED: MaxDepth = MaxDepth(None);

    /// Sort key where unlimited depth counts as deepest.
    pub fn rank(self) -> usize {
        self.0.unwrap_or(usize::MAX)
    }
}

impl Serialize for MaxDepth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for MaxDepth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Depth(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Depth(v) => Ok(MaxDepth(Some(v as usize))),
            Raw::Name(s) if s == "none" => Ok(MaxDepth(None)),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("invalid max_depth `{s}`"))),
        }
    }
}

impl std::str::FromStr for MaxDepth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            return Ok(MaxDepth(None));
        }
        s.parse::<usize>()
            .map(|d| MaxDepth(Some(d)))
            .map_err(|_| format!("invalid max_depth `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: MaxDepth,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: MaxDepth::UNLIMITED,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 0,
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
        cover: usize,
    },
    Leaf {
        class_counts: Vec<usize>,
        cover: usize,
    },
}

impl Node {
    pub fn cover(&self) -> usize {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Anything that maps a feature vector to a class-probability vector.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// Probability vector without the dimension check.
    fn proba_unchecked(&self, x: &[f64]) -> Vec<f64>;

    /// Predicted label without the dimension check.
    fn label_unchecked(&self, x: &[f64]) -> usize {
        argmax(&self.proba_unchecked(x))
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(self.proba_unchecked(x))
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.n_features(), x)?;
        Ok(self.label_unchecked(x))
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Gini impurity `1 - sum p_k^2` of a count vector.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl TreeModel {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Arena index of the leaf reached by `x`.
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
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Normalized class counts of leaf `i`.
    pub fn leaf_distribution(&self, i: usize) -> Vec<f64> {
        match &self.nodes[i] {
            Node::Leaf {
                class_counts,
                cover,
            } => class_counts
                .iter()
                .map(|&c| c as f64 / *cover as f64)
                .collect(),
            Node::Split { .. } => panic!("node {i} is not a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &TreeModel, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    /// A tree that is a single leaf.
    pub fn single_leaf(class_counts: Vec<usize>, n_features: usize) -> TreeModel {
        let cover = class_counts.iter().sum();
        TreeModel {
            n_classes: class_counts.len(),
            nodes: vec![Node::Leaf {
                class_counts,
                cover,
            }],
            n_features,
        }
    }

    /// Checks the structural invariants (cover additivity, leaf counts,
    /// feature bounds, child indices).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Serialization(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    left,
                    right,
                    cover,
                    threshold,
                } => {
                    if *feature >= self.n_features {
                        return bad(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return bad(format!("node {i}: non-finite threshold"));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return bad(format!("node {i}: child index out of range"));
                    }
                    let sum = self.nodes[*left].cover() + self.nodes[*right].cover();
                    if sum != *cover {
                        return bad(format!("node {i}: cover {cover} != children {sum}"));
                    }
                }
                Node::Leaf {
                    class_counts,
                    cover,
                } => {
                    if class_counts.len() != self.n_classes {
                        return bad(format!("node {i}: wrong class count length"));
                    }
                    if *cover == 0 || class_counts.iter().sum::<usize>() != *cover {
                        return bad(format!("node {i}: leaf counts do not sum to cover"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn proba_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.leaf_distribution(self.leaf_index(x))
    }
}

/// Grows a tree on `rows` of `(features, labels)`. Duplicated row indices
/// (bootstrap draws) count once per occurrence in every cover.
pub fn fit_tree_on_rows(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut impl Rng,
) -> TreeModel {
    let n_features = features.first().map_or(0, Vec::len);
    let mut builder = Builder {
        features,
        labels,
        n_classes,
        n_features,
        params,
        nodes: Vec::new(),
    };
    if rows.is_empty() {
        return TreeModel::single_leaf(vec![1; n_classes.max(1)], n_features);
    }
    builder.grow(rows, 0, rng);
    TreeModel {
        nodes: builder.nodes,
        n_features,
        n_classes,
    }
}

/// Fits a single decision tree on all rows.
pub fn fit_tree(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &TreeParams,
) -> TreeModel {
    let rows: Vec<usize> = (0..features.len()).collect();
    let mut rng = crate::rng::stream(params.seed, 0);
    fit_tree_on_rows(features, labels, n_classes, &rows, params, &mut rng)
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    n_features: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.labels[r]] += 1;
        }
        c
    }

    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut impl Rng) -> usize {
        let counts = self.counts(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class_counts: counts.clone(),
            cover: rows.len(),
        });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.0.is_some_and(|d| depth >= d);
        let msl = self.params.min_samples_leaf.max(1);
        if pure || depth_reached || rows.len() < 2 * msl {
            return id;
        }
        let Some(best) = self.best_split(rows, &counts, rng) else {
            return id;
        };

        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .copied()
            .partition(|&r| self.features[r][best.feature] <= best.threshold);
        let l = self.grow(&left, depth + 1, rng);
        let r = self.grow(&right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
            cover: rows.len(),
        };
        id
    }

    /// Best split among a random subset of features. Candidates beyond the
    /// first `max_features` are only examined if none of those admits a
    /// valid split.
    fn best_split(
        &self,
        rows: &[usize],
        counts: &[usize],
        rng: &mut impl Rng,
    ) -> Option<Candidate> {
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let budget = self.params.max_features.resolve(self.n_features);
        let msl = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        let parent_score: f64 = counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64;

        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for (visited, &feature) in order.iter().enumerate() {
            if visited >= budget && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(
                rows.iter()
                    .map(|&r| (self.features[r][feature], self.labels[r])),
            );
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue;
            }
            let mut left = vec![0usize; self.n_classes];
            let mut left_sq = 0.0f64;
            let mut right_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
            let mut right = counts.to_vec();
            for i in 0..n - 1 {
                let k = sorted[i].1;
                // maintain sum of squared counts incrementally
                left_sq += (2 * left[k] + 1) as f64;
                right_sq -= (2 * right[k] - 1) as f64;
                left[k] += 1;
                right[k] -= 1;
                let n_left = i + 1;
                if sorted[i].0 == sorted[i + 1].0 || n_left < msl || n - n_left < msl {
                    continue;
                }
                // sum_child sum_k c_k^2 / n_child; larger means lower weighted Gini
                let score = left_sq / n_left as f64 + right_sq / (n - n_left) as f64;
                if score < parent_score - 1e-12 * parent_score.abs() {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let lo = sorted[i].0;
                    let hi = sorted[i + 1].0;
                    let mut threshold = lo + (hi - lo) / 2.0;
                    // midpoint of adjacent floats can round up to `hi`
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NestedNode {
    Split {
        feature: usize,
        threshold: f64,
        cover: usize,
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
    Leaf {
        class_counts: Vec<usize>,
        cover: usize,
    },
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TreeDocument {
    n_features: usize,
    n_classes: usize,
    root: NestedNode,
}

impl TreeModel {
    fn nest(&self, i: usize) -> NestedNode {
        match &self.nodes[i] {
            Node::Leaf {
                class_counts,
                cover,
            } => NestedNode::Leaf {
                class_counts: class_counts.clone(),
                cover: *cover,
            },
            Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
            } => NestedNode::Split {
                feature: *feature,
                threshold: *threshold,
                cover: *cover,
                left: Box::new(self.nest(*left)),
                right: Box::new(self.nest(*right)),
            },
        }
    }

    pub(crate) fn to_document(&self) -> TreeDocument {
        TreeDocument {
            n_features: self.n_features,
            n_classes: self.n_classes,
            root: self.nest(0),
        }
    }

    pub(crate) fn from_document(doc: TreeDocument) -> Result<TreeModel> {
        fn flatten(n: NestedNode, out: &mut Vec<Node>) -> usize {
            let id = out.len();
            match n {
                NestedNode::Leaf {
                    class_counts,
                    cover,
                } => out.push(Node::Leaf {
                    class_counts,
                    cover,
                }),
                NestedNode::Split {
                    feature,
                    threshold,
                    cover,
                    left,
                    right,
                } => {
                    out.push(Node::Leaf {
                        class_counts: vec![],
                        cover: 0,
                    });
                    let l = flatten(*left, out);
                    let r = flatten(*right, out);
                    out[id] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        cover,
                    };
                }
            }
            id
        }
        let mut nodes = Vec::new();
        flatten(doc.root, &mut nodes);
        let tree = TreeModel {
            nodes,
            n_features: doc.n_features,
            n_classes: doc.n_classes,
        };
        tree.validate()?;
        Ok(tree)
    }
}
