//! Explanation functions `g` paired with their predictor `f`, as consumed
//! by the robustness metric and the heatmaps.
//!
//! Neighborhood sweeps evaluate `g` at thousands of points inside a small
//! box around a center. Inside such a box most split decisions cannot
//! change, so [`LocalExplainer`]s built by the tree-based functions cache
//! per-tree results keyed by the decisions of the few splits whose
//! thresholds fall inside the box. Cached and direct evaluation run the
//! same arithmetic in the same order and agree bit for bit.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::axom::combine_majority;
use crate::forest::{ForestModel, Vote};
use crate::shap::{Explanation, OutputMode, PreparedTree};
use crate::tree::{argmax, Node, TreeModel};

/// The three explanation methods compared throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// SHAP of the single decision tree.
    Dt,
    /// SHAP of the forest (mean of all weak explanations).
    Rf,
    /// Mean of the weak explanations that agree with the forest label.
    Axom,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dt, Method::Rf, Method::Axom];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dt => "dt",
            Method::Rf => "rf",
            Method::Axom => "axom",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Dt => "DT",
            Method::Rf => "RF",
            Method::Axom => "AXOM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dt" => Ok(Method::Dt),
            "rf" => Ok(Method::Rf),
            "axom" => Ok(Method::Axom),
            other => Err(format!(
                "unknown method `{other}` (expected dt, rf or axom)"
            )),
        }
    }
}

/// An explanation function `g` together with the predictor `f` whose
/// labels define same-label neighborhoods.
pub trait ExplanationFunction: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// An evaluator specialised to the box `center ± radius`. Points outside
    /// the box are still handled, only without caching.
    fn local<'a>(&'a self, center: &[f64], radius: f64) -> Box<dyn LocalExplainer + 'a>;
}

pub trait LocalExplainer {
    fn label(&mut self, x: &[f64]) -> usize;
    /// Flattened `[n_classes x n_features]` attribution matrix.
    fn explain(&mut self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Combine {
    Mean,
    Majority,
}

/// Tree-ensemble explanation function: DT (one tree), RF or AXOM.
pub struct EnsembleShap<'m> {
    trees: Vec<PreparedTree<'m>>,
    vote: Vote,
    combine: Combine,
    n_features: usize,
    n_classes: usize,
}

impl<'m> EnsembleShap<'m> {
    pub fn tree(tree: &'m TreeModel, mode: OutputMode) -> Self {
        EnsembleShap {
            trees: vec![PreparedTree::new(tree, mode)],
            vote: Vote::Soft,
            combine: Combine::Mean,
            n_features: tree.n_features,
            n_classes: tree.n_classes,
        }
    }

    pub fn forest(forest: &'m ForestModel, mode: OutputMode) -> Self {
        Self::for_forest(forest, mode, Combine::Mean)
    }

    pub fn axom(forest: &'m ForestModel, mode: OutputMode) -> Self {
        Self::for_forest(forest, mode, Combine::Majority)
    }

    fn for_forest(forest: &'m ForestModel, mode: OutputMode, combine: Combine) -> Self {
        EnsembleShap {
            trees: forest
                .trees
                .iter()
                .map(|t| PreparedTree::new(t, mode))
                .collect(),
            vote: forest.vote(),
            combine,
            n_features: forest.n_features,
            n_classes: forest.n_classes,
        }
    }

    /// Direct (uncached) evaluation: label and attribution matrix.
    pub fn evaluate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let evals: Vec<Rc<TreeEval>> = self
            .trees
            .iter()
            .map(|t| Rc::new(TreeEval::new(t, x)))
            .collect();
        self.reduce(&evals, x)
    }

    fn reduce(&self, evals: &[Rc<TreeEval>], x: &[f64]) -> (usize, Vec<f64>) {
        let mut proba = vec![0.0; self.n_classes];
        for e in evals {
            for (a, p) in proba.iter_mut().zip(&e.proba) {
                *a += p;
            }
        }
        let m = evals.len() as f64;
        proba.iter_mut().for_each(|a| *a /= m);
        let tree_labels: Vec<usize> = evals.iter().map(|e| e.label).collect();
        let label = match self.vote {
            Vote::Soft => argmax(&proba),
            Vote::Hard => {
                let mut votes = vec![0.0; self.n_classes];
                for &l in &tree_labels {
                    votes[l] += 1.0;
                }
                argmax(&votes)
            }
        };
        let parts: Vec<&Explanation> = evals.iter().map(|e| &e.phi).collect();
        let combined = match self.combine {
            Combine::Mean => Explanation::mean(parts.iter().copied(), x),
            Combine::Majority => combine_majority(&parts, &tree_labels, label, x).explanation,
        };
        (label, combined.values)
    }
}

struct TreeEval {
    proba: Vec<f64>,
    label: usize,
    phi: Explanation,
}

impl TreeEval {
    fn new(tree: &PreparedTree<'_>, x: &[f64]) -> Self {
        let proba = tree.tree.leaf_distribution(tree.tree.leaf_index(x));
        TreeEval {
            label: argmax(&proba),
            proba,
            phi: tree.explain(x),
        }
    }
}

/// Splits of one tree whose decision can vary inside the box.
struct LocalTree {
    active: Vec<(usize, f64)>,
    center: Rc<TreeEval>,
    cache: HashMap<Vec<u64>, Rc<TreeEval>>,
}

pub struct LocalEnsemble<'a, 'm> {
    owner: &'a EnsembleShap<'m>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    trees: Vec<LocalTree>,
}

impl<'a, 'm> LocalEnsemble<'a, 'm> {
    fn new(owner: &'a EnsembleShap<'m>, center: &[f64], radius: f64) -> Self {
        // a little slack so lattice points that round past the box edge
        // still count as inside
        let slack = 1e-9 * (1.0 + radius.abs());
        let lo: Vec<f64> = center.iter().map(|c| c - radius - slack).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + radius + slack).collect();
        let trees = owner
            .trees
            .iter()
            .map(|t| {
                let active = t
                    .split_nodes()
                    .iter()
                    .filter_map(|&i| match &t.tree.nodes[i] {
                        Node::Split {
                            feature, threshold, ..
                        } if *threshold >= lo[*feature] && *threshold < hi[*feature] => {
                            Some((*feature, *threshold))
                        }
                        _ => None,
                    })
                    .collect();
                LocalTree {
                    active,
                    center: Rc::new(TreeEval::new(t, center)),
                    cache: HashMap::new(),
                }
            })
            .collect();
        LocalEnsemble {
            owner,
            lo,
            hi,
            trees,
        }
    }

    fn inside(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    fn evaluate(&mut self, x: &[f64]) -> (usize, Vec<f64>) {
        if !self.inside(x) {
            return self.owner.evaluate(x);
        }
        let evals: Vec<Rc<TreeEval>> = self
            .trees
            .iter_mut()
            .zip(&self.owner.trees)
            .map(|(local, prepared)| {
                if local.active.is_empty() {
                    return Rc::clone(&local.center);
                }
                let mut key = vec![0u64; local.active.len().div_ceil(64)];
                for (bit, &(feature, threshold)) in local.active.iter().enumerate() {
                    if x[feature] <= threshold {
                        key[bit / 64] |= 1 << (bit % 64);
                    }
                }
                Rc::clone(
                    local
                        .cache
                        .entry(key)
                        .or_insert_with(|| Rc::new(TreeEval::new(prepared, x))),
                )
            })
            .collect();
        self.owner.reduce(&evals, x)
    }
}

impl LocalExplainer for LocalEnsemble<'_, '_> {
    fn label(&mut self, x: &[f64]) -> usize {
        if !self.inside(x) {
            return self.owner.evaluate(x).0;
        }
        // labels only need leaf distributions; reuse the cached evaluations
        self.evaluate(x).0
    }

    fn explain(&mut self, x: &[f64]) -> Vec<f64> {
        self.evaluate(x).1
    }
}

impl ExplanationFunction for EnsembleShap<'_> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn local<'a>(&'a self, center: &[f64], radius: f64) -> Box<dyn LocalExplainer + 'a> {
        Box::new(LocalEnsemble::new(self, center, radius))
    }
}

/// Explanation function from plain closures, evaluated without caching.
pub struct FnExplainer<L, G> {
    pub n_features: usize,
    pub n_classes: usize,
    pub label: L,
    pub explain: G,
}

struct FnLocal<'a, L, G>(&'a FnExplainer<L, G>);

impl<L, G> LocalExplainer for FnLocal<'_, L, G>
where
    L: Fn(&[f64]) -> usize + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn label(&mut self, x: &[f64]) -> usize {
        (self.0.label)(x)
    }

    fn explain(&mut self, x: &[f64]) -> Vec<f64> {
        (self.0.explain)(x)
    }
}

impl<L, G> ExplanationFunction for FnExplainer<L, G>
where
    L: Fn(&[f64]) -> usize + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn local<'a>(&'a self, _center: &[f64], _radius: f64) -> Box<dyn LocalExplainer + 'a> {
        Box::new(FnLocal(self))
    }
}

/// `g` multiplied by a constant, labels unchanged.
pub struct Scaled<E> {
    pub inner: E,
    pub factor: f64,
}

struct ScaledLocal<'a> {
    inner: Box<dyn LocalExplainer + 'a>,
    factor: f64,
}

impl LocalExplainer for ScaledLocal<'_> {
    fn label(&mut self, x: &[f64]) -> usize {
        self.inner.label(x)
    }

    fn explain(&mut self, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.explain(x);
        g.iter_mut().for_each(|v| *v *= self.factor);
        g
    }
}

impl<E: ExplanationFunction> ExplanationFunction for Scaled<E> {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    fn local<'a>(&'a self, center: &[f64], radius: f64) -> Box<dyn LocalExplainer + 'a> {
        Box::new(ScaledLocal {
            inner: self.inner.local(center, radius),
            factor: self.factor,
        })
    }
}
