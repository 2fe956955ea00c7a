//! Exact Shapley-value explanations for trees and forests.
//!
//! The coalition game for class `k` is the path-dependent masked evaluation
//! [`eval_masked`]: features in the coalition follow `x`, the others are
//! marginalized by training cover. [`shap_bruteforce`] enumerates every
//! coalition and serves as the oracle for the polynomial [`shap_fast`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::tree::{argmax, check_dim, Node, TreeModel};

/// Largest feature count [`shap_bruteforce`] accepts.
pub const BRUTEFORCE_MAX_FEATURES: usize = 20;

/// What a leaf contributes to the class-`k` game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// Leaf class distribution (normalized counts).
    #[default]
    Probability,
    /// One-hot of the leaf's majority class.
    HardIndicator,
}

/// Per-class, per-feature Shapley values for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub n_classes: usize,
    pub n_features: usize,
    /// Row-major `[n_classes x n_features]`.
    pub values: Vec<f64>,
    pub base_values: Vec<f64>,
    pub sample: Vec<f64>,
}

impl Explanation {
    pub fn zeros(n_classes: usize, n_features: usize, sample: &[f64]) -> Self {
        Explanation {
            n_classes,
            n_features,
            values: vec![0.0; n_classes * n_features],
            base_values: vec![0.0; n_classes],
            sample: sample.to_vec(),
        }
    }

    pub fn phi(&self, class: usize, feature: usize) -> f64 {
        self.values[class * self.n_features + feature]
    }

    /// The `R^{1 x p}` slice for one class.
    pub fn class_row(&self, class: usize) -> &[f64] {
        &self.values[class * self.n_features..(class + 1) * self.n_features]
    }

    /// `base_k + sum_a phi_{k,a}` for every class.
    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| self.base_values[k] + self.class_row(k).iter().sum::<f64>())
            .collect()
    }

    /// Largest `|base_k + sum_a phi_{k,a} - target_k|`.
    pub fn efficiency_residual(&self, target: &[f64]) -> f64 {
        self.reconstruct()
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Explanation) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .chain(self.base_values.iter().zip(&other.base_values))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Unweighted mean, summed in the order given.
    pub fn mean<'a>(
        parts: impl IntoIterator<Item = &'a Explanation>,
        sample: &[f64],
    ) -> Explanation {
        let mut iter = parts.into_iter();
        let first = iter.next().expect("mean of zero explanations");
        let mut acc = first.clone();
        acc.sample = sample.to_vec();
        let mut n = 1usize;
        for e in iter {
            for (a, v) in acc.values.iter_mut().zip(&e.values) {
                *a += v;
            }
            for (a, v) in acc.base_values.iter_mut().zip(&e.base_values) {
                *a += v;
            }
            n += 1;
        }
        let m = n as f64;
        acc.values.iter_mut().for_each(|v| *v /= m);
        acc.base_values.iter_mut().for_each(|v| *v /= m);
        acc
    }
}

/// Leaf output vectors indexed by arena node (empty for split nodes).
pub fn leaf_outputs(tree: &TreeModel, mode: OutputMode) -> Vec<Vec<f64>> {
    tree.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| match n {
            Node::Split { .. } => Vec::new(),
            Node::Leaf { .. } => {
                let dist = tree.leaf_distribution(i);
                match mode {
                    OutputMode::Probability => dist,
                    OutputMode::HardIndicator => {
                        let mut onehot = vec![0.0; dist.len()];
                        onehot[argmax(&dist)] = 1.0;
                        onehot
                    }
                }
            }
        })
        .collect()
}

fn eval_masked_with(
    tree: &TreeModel,
    leaves: &[Vec<f64>],
    x: &[f64],
    known: &[bool],
    node: usize,
) -> Vec<f64> {
    match &tree.nodes[node] {
        Node::Leaf { .. } => leaves[node].clone(),
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        } => {
            if known[*feature] {
                let child = if x[*feature] <= *threshold {
                    *left
                } else {
                    *right
                };
                eval_masked_with(tree, leaves, x, known, child)
            } else {
                let lw = tree.nodes[*left].cover() as f64;
                let rw = tree.nodes[*right].cover() as f64;
                let c = *cover as f64;
                let l = eval_masked_with(tree, leaves, x, known, *left);
                let r = eval_masked_with(tree, leaves, x, known, *right);
                l.iter()
                    .zip(&r)
                    .map(|(a, b)| (lw * a + rw * b) / c)
                    .collect()
            }
        }
    }
}

/// Expected output with the features in `known` fixed to `x` and the rest
/// marginalized by training cover.
pub fn eval_masked(tree: &TreeModel, x: &[f64], known: &[bool], mode: OutputMode) -> Vec<f64> {
    let leaves = leaf_outputs(tree, mode);
    eval_masked_with(tree, &leaves, x, known, 0)
}

/// Cover-weighted mean of leaf outputs: the explanation's base value.
pub fn expected_value(tree: &TreeModel, mode: OutputMode) -> Vec<f64> {
    let leaves = leaf_outputs(tree, mode);
    let root = tree.root().cover() as f64;
    let mut acc = vec![0.0; tree.n_classes];
    for (i, n) in tree.nodes.iter().enumerate() {
        if let Node::Leaf { cover, .. } = n {
            let w = *cover as f64 / root;
            for (a, v) in acc.iter_mut().zip(&leaves[i]) {
                *a += w * v;
            }
        }
    }
    acc
}

/// Shapley weight `|S|! (p - |S| - 1)! / p!` as `1 / (p * C(p-1, |S|))`.
pub fn shapley_weight(subset_size: usize, n_players: usize) -> f64 {
    let n = n_players - 1;
    let s = subset_size.min(n - subset_size);
    let mut binom = 1.0f64;
    for i in 0..s {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    1.0 / (n_players as f64 * binom.round())
}

/// Shapley values of an arbitrary vector-valued game over `n_players`
/// features by full coalition enumeration. Returns `(phi, v(empty))` with
/// `phi` row-major `[n_outputs x n_players]`.
pub fn shapley_enumerate(
    n_players: usize,
    n_outputs: usize,
    value: impl Fn(&[bool]) -> Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_players > BRUTEFORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            n_features: n_players,
            limit: BRUTEFORCE_MAX_FEATURES,
        });
    }
    if n_players == 0 {
        return Ok((Vec::new(), value(&[])));
    }
    let n_masks = 1usize << n_players;
    let mut known = vec![false; n_players];
    let table: Vec<Vec<f64>> = (0..n_masks)
        .map(|mask| {
            for (a, k) in known.iter_mut().enumerate() {
                *k = mask >> a & 1 == 1;
            }
            value(&known)
        })
        .collect();
    let weights: Vec<f64> = (0..n_players)
        .map(|s| shapley_weight(s, n_players))
        .collect();
    let mut phi = vec![0.0; n_outputs * n_players];
    for a in 0..n_players {
        let bit = 1usize << a;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let w = weights[mask.count_ones() as usize];
            let with = &table[mask | bit];
            let without = &table[mask];
            for k in 0..n_outputs {
                phi[k * n_players + a] += w * (with[k] - without[k]);
            }
        }
    }
    Ok((phi, table[0].clone()))
}

/// Direct coalition enumeration over all `2^p` subsets; the oracle.
pub fn shap_bruteforce(tree: &TreeModel, x: &[f64], mode: OutputMode) -> Result<Explanation> {
    check_dim(tree.n_features, x)?;
    let leaves = leaf_outputs(tree, mode);
    let (values, base) = shapley_enumerate(tree.n_features, tree.n_classes, |known| {
        eval_masked_with(tree, &leaves, x, known, 0)
    })?;
    Ok(Explanation {
        n_classes: tree.n_classes,
        n_features: tree.n_features,
        values,
        base_values: base,
        sample: x.to_vec(),
    })
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend_path(
    path: &mut [PathElement],
    depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: usize,
) {
    path[depth] = PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * d1 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero * d1 / (depth - i) as f64;
        }
    }
    total
}

struct FastShap<'a> {
    tree: &'a TreeModel,
    leaves: &'a [Vec<f64>],
    x: &'a [f64],
    phi: Vec<f64>,
}

impl FastShap<'_> {
    fn recurse(
        &mut self,
        node: usize,
        parent: &[PathElement],
        depth: usize,
        zero_fraction: f64,
        one_fraction: f64,
        feature: usize,
    ) {
        let mut path = Vec::with_capacity(depth + 2);
        path.extend_from_slice(&parent[..depth]);
        path.push(PathElement {
            feature: NO_FEATURE,
            zero_fraction: 0.0,
            one_fraction: 0.0,
            weight: 0.0,
        });
        extend_path(&mut path, depth, zero_fraction, one_fraction, feature);
        let mut depth = depth;

        match &self.tree.nodes[node] {
            Node::Leaf { .. } => {
                let p = self.tree.n_features;
                let value = &self.leaves[node];
                for i in 1..=depth {
                    let w = unwound_path_sum(&path, depth, i);
                    let el = path[i];
                    let scale = w * (el.one_fraction - el.zero_fraction);
                    for (k, v) in value.iter().enumerate() {
                        self.phi[k * p + el.feature] += scale * v;
                    }
                }
            }
            Node::Split {
                feature: split_feature,
                threshold,
                left,
                right,
                cover,
            } => {
                let (hot, cold) = if self.x[*split_feature] <= *threshold {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let c = *cover as f64;
                let hot_zero = self.tree.nodes[hot].cover() as f64 / c;
                let cold_zero = self.tree.nodes[cold].cover() as f64 / c;
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..=depth).find(|&i| path[i].feature == *split_feature) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind_path(&mut path, depth, k);
                    depth -= 1;
                }
                self.recurse(
                    hot,
                    &path,
                    depth + 1,
                    hot_zero * incoming_zero,
                    incoming_one,
                    *split_feature,
                );
                self.recurse(
                    cold,
                    &path,
                    depth + 1,
                    cold_zero * incoming_zero,
                    0.0,
                    *split_feature,
                );
            }
        }
    }
}

/// Polynomial-time path-dependent tree SHAP, from precomputed leaf outputs.
pub(crate) fn shap_fast_with(
    tree: &TreeModel,
    leaves: &[Vec<f64>],
    base: &[f64],
    x: &[f64],
) -> Explanation {
    let mut state = FastShap {
        tree,
        leaves,
        x,
        phi: vec![0.0; tree.n_classes * tree.n_features],
    };
    if !tree.root().is_leaf() {
        state.recurse(0, &[], 0, 1.0, 1.0, NO_FEATURE);
    }
    Explanation {
        n_classes: tree.n_classes,
        n_features: tree.n_features,
        values: state.phi,
        base_values: base.to_vec(),
        sample: x.to_vec(),
    }
}

/// Exact tree SHAP in `O(leaves * depth^2)` per class.
pub fn shap_fast(tree: &TreeModel, x: &[f64], mode: OutputMode) -> Result<Explanation> {
    check_dim(tree.n_features, x)?;
    let prepared = PreparedTree::new(tree, mode);
    Ok(prepared.explain(x))
}

/// Mean of the per-tree explanations. Under soft voting this is the SHAP
/// explanation of the ensemble itself, by linearity of the Shapley value.
pub fn shap_forest(forest: &ForestModel, x: &[f64], mode: OutputMode) -> Result<Explanation> {
    check_dim(forest.n_features, x)?;
    let parts: Vec<Explanation> = forest
        .trees
        .iter()
        .map(|t| PreparedTree::new(t, mode).explain(x))
        .collect();
    Ok(Explanation::mean(&parts, x))
}

/// A tree with its leaf outputs and base value computed once.
#[derive(Debug, Clone)]
pub struct PreparedTree<'a> {
    pub tree: &'a TreeModel,
    pub mode: OutputMode,
    leaves: Vec<Vec<f64>>,
    base: Vec<f64>,
    /// Arena indices of split nodes, in arena order.
    split_nodes: Vec<usize>,
}

impl<'a> PreparedTree<'a> {
    pub fn new(tree: &'a TreeModel, mode: OutputMode) -> Self {
        let split_nodes = tree
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_leaf())
            .map(|(i, _)| i)
            .collect();
        PreparedTree {
            tree,
            mode,
            leaves: leaf_outputs(tree, mode),
            base: expected_value(tree, mode),
            split_nodes,
        }
    }

    pub fn explain(&self, x: &[f64]) -> Explanation {
        shap_fast_with(self.tree, &self.leaves, &self.base, x)
    }

    pub fn base_values(&self) -> &[f64] {
        &self.base
    }

    pub fn split_nodes(&self) -> &[usize] {
        &self.split_nodes
    }

    /// Routing decision of `x` at every split node.
    pub fn region(&self, x: &[f64]) -> RegionId {
        let mut decisions = vec![0u64; self.split_nodes.len().div_ceil(64)];
        for (bit, &node) in self.split_nodes.iter().enumerate() {
            if let Node::Split {
                feature, threshold, ..
            } = &self.tree.nodes[node]
            {
                if x[*feature] <= *threshold {
                    decisions[bit / 64] |= 1 << (bit % 64);
                }
            }
        }
        RegionId {
            leaf: self.tree.leaf_index(x),
            decisions,
        }
    }
}

/// Region of explanation constancy of one tree: the leaf reached plus the
/// routing decision at every split node. Path-dependent SHAP marginalizes
/// through off-path subtrees, so splits off the root-to-leaf path still
/// shape the explanation; two inputs with equal `RegionId`s get identical
/// explanations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionId {
    pub leaf: usize,
    pub decisions: Vec<u64>,
}

/// One [`RegionId`] per tree of the model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeafSignature {
    pub regions: Vec<RegionId>,
}

impl LeafSignature {
    pub fn leaves(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.leaf).collect()
    }

    /// Number of trees whose region differs.
    pub fn distance(&self, other: &LeafSignature) -> usize {
        self.regions
            .iter()
            .zip(&other.regions)
            .filter(|(a, b)| a != b)
            .count()
    }
}

pub fn leaf_signature_tree(tree: &TreeModel, x: &[f64]) -> LeafSignature {
    LeafSignature {
        regions: vec![PreparedTree::new(tree, OutputMode::Probability).region(x)],
    }
}

pub fn leaf_signature_forest(forest: &ForestModel, x: &[f64]) -> LeafSignature {
    LeafSignature {
        regions: forest
            .trees
            .iter()
            .map(|t| PreparedTree::new(t, OutputMode::Probability).region(x))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Classifier;

    fn stump(
        feature: usize,
        threshold: f64,
        left: Vec<usize>,
        right: Vec<usize>,
        p: usize,
    ) -> TreeModel {
        let lc: usize = left.iter().sum();
        let rc: usize = right.iter().sum();
        let k = left.len();
        TreeModel {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    cover: lc + rc,
                },
                Node::Leaf {
                    class_counts: left,
                    cover: lc,
                },
                Node::Leaf {
                    class_counts: right,
                    cover: rc,
                },
            ],
            n_features: p,
            n_classes: k,
        }
    }

    #[test]
    fn masked_evaluation_of_a_stump() {
        let t = stump(0, 0.5, vec![30, 0], vec![0, 70], 2);
        assert_eq!(
            eval_masked(&t, &[0.2, 0.0], &[false, false], OutputMode::Probability),
            vec![0.3, 0.7]
        );
        assert_eq!(
            eval_masked(&t, &[0.2, 0.0], &[true, true], OutputMode::Probability),
            vec![1.0, 0.0]
        );
        assert_eq!(expected_value(&t, OutputMode::Probability), vec![0.3, 0.7]);
    }

    #[test]
    fn single_leaf_has_zero_attribution() {
        let t = TreeModel::single_leaf(vec![2, 6], 3);
        let x = [0.1, 0.2, 0.3];
        for e in [
            shap_fast(&t, &x, OutputMode::Probability).unwrap(),
            shap_bruteforce(&t, &x, OutputMode::Probability).unwrap(),
        ] {
            assert!(e.values.iter().all(|&v| v == 0.0));
            assert_eq!(e.base_values, vec![0.25, 0.75]);
        }
    }

    #[test]
    fn stump_dummy_features_are_exactly_zero() {
        let t = stump(0, 0.5, vec![30, 10], vec![5, 55], 4);
        let x = [0.7, 0.1, 0.9, 0.3];
        let fast = shap_fast(&t, &x, OutputMode::Probability).unwrap();
        let brute = shap_bruteforce(&t, &x, OutputMode::Probability).unwrap();
        for k in 0..2 {
            for a in 1..4 {
                assert_eq!(fast.phi(k, a), 0.0);
                assert_eq!(brute.phi(k, a), 0.0);
            }
        }
        // phi_0 = f(x) - E[f]
        let proba = t.predict_proba(&x).unwrap();
        for k in 0..2 {
            assert!((fast.phi(k, 0) - (proba[k] - fast.base_values[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn brute_force_guard() {
        let t = TreeModel::single_leaf(vec![1, 1], 21);
        let x = vec![0.0; 21];
        assert!(matches!(
            shap_bruteforce(&t, &x, OutputMode::Probability),
            Err(Error::TooManyFeatures {
                n_features: 21,
                limit: 20
            })
        ));
    }

    #[test]
    fn shapley_weights_sum_to_one_per_player() {
        // sum over subsets of the other p-1 players of the weight is 1
        for p in 1..=12usize {
            let total: f64 = (0..p)
                .map(|s| {
                    let mut binom = 1.0;
                    for i in 0..s {
                        binom = binom * (p - 1 - i) as f64 / (i + 1) as f64;
                    }
                    binom * shapley_weight(s, p)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn hard_indicator_uses_one_hot_leaves() {
        let t = stump(0, 0.5, vec![3, 1], vec![1, 2], 1);
        let e = shap_fast(&t, &[0.2], OutputMode::HardIndicator).unwrap();
        assert_eq!(e.reconstruct(), vec![1.0, 0.0]);
    }

    #[test]
    fn off_path_split_changes_explanation_but_not_leaf() {
        // root on f0; both children split f1 at different thresholds
        let t = TreeModel {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 40,
                },
                Node::Split {
                    feature: 1,
                    threshold: 0.3,
                    left: 3,
                    right: 4,
                    cover: 20,
                },
                Node::Split {
                    feature: 1,
                    threshold: 0.7,
                    left: 5,
                    right: 6,
                    cover: 20,
                },
                Node::Leaf {
                    class_counts: vec![9, 1],
                    cover: 10,
                },
                Node::Leaf {
                    class_counts: vec![2, 8],
                    cover: 10,
                },
                Node::Leaf {
                    class_counts: vec![5, 5],
                    cover: 10,
                },
                Node::Leaf {
                    class_counts: vec![0, 10],
                    cover: 10,
                },
            ],
            n_features: 2,
            n_classes: 2,
        };
        let a = [0.2, 0.6];
        let b = [0.2, 0.8];
        assert_eq!(t.leaf_index(&a), t.leaf_index(&b));
        let ea = shap_fast(&t, &a, OutputMode::Probability).unwrap();
        let eb = shap_fast(&t, &b, OutputMode::Probability).unwrap();
        assert_ne!(ea.values, eb.values);
        assert_ne!(leaf_signature_tree(&t, &a), leaf_signature_tree(&t, &b));
    }
}
