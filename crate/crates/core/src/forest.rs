//! Bagged random forests of CART trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tree::{self, argmax, Classifier, MaxDepth, MaxFeatures, TreeModel, TreeParams};

/// Ensemble aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    /// Argmax of the mean per-tree probability vector.
    #[default]
    Soft,
    /// Most frequent per-tree label.
    Hard,
}

impl std::str::FromStr for Vote {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "soft" => Ok(Vote::Soft),
            "hard" => Ok(Vote::Hard),
            other => Err(format!("invalid vote rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: MaxDepth,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    #[serde(default)]
    pub vote: Vote,
}

fn default_true() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: MaxDepth::UNLIMITED,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
            bootstrap: true,
            vote: Vote::Soft,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_features: usize,
    pub n_classes: usize,
    /// Seed of each tree's bootstrap/feature-subsample stream.
    pub tree_seeds: Vec<u64>,
    pub params: ForestParams,
}

impl ForestModel {
    /// Builds a forest from already-grown trees.
    pub fn from_trees(trees: Vec<TreeModel>, vote: Vote) -> Result<ForestModel> {
        let first = trees
            .first()
            .ok_or_else(|| Error::Config("a forest needs at least one tree".into()))?;
        let (p, k) = (first.n_features, first.n_classes);
        if trees.iter().any(|t| t.n_features != p || t.n_classes != k) {
            return Err(Error::Config(
                "trees disagree on feature or class count".into(),
            ));
        }
        Ok(ForestModel {
            tree_seeds: vec![0; trees.len()],
            params: ForestParams {
                n_estimators: trees.len(),
                bootstrap: false,
                vote,
                ..ForestParams::default()
            },
            trees,
            n_features: p,
            n_classes: k,
        })
    }

    pub fn vote(&self) -> Vote {
        self.params.vote
    }

    pub fn with_vote(mut self, vote: Vote) -> Self {
        self.params.vote = vote;
        self
    }

    /// Per-tree predicted labels.
    pub fn tree_labels(&self, x: &[f64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.label_unchecked(x)).collect()
    }

    /// Ensemble label given the per-tree labels, under the configured rule.
    pub(crate) fn label_from_parts(&self, proba: &[f64], tree_labels: &[usize]) -> usize {
        match self.params.vote {
            Vote::Soft => argmax(proba),
            Vote::Hard => {
                let mut votes = vec![0.0; self.n_classes];
                for &l in tree_labels {
                    votes[l] += 1.0;
                }
                argmax(&votes)
            }
        }
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean of the per-tree probability vectors, summed in tree order.
    fn proba_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            let leaf = t.leaf_index(x);
            if let tree::Node::Leaf {
                class_counts,
                cover,
            } = &t.nodes[leaf]
            {
                let c = *cover as f64;
                for (a, &n) in acc.iter_mut().zip(class_counts) {
                    *a += n as f64 / c;
                }
            }
        }
        let m = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    fn label_unchecked(&self, x: &[f64]) -> usize {
        match self.params.vote {
            Vote::Soft => argmax(&self.proba_unchecked(x)),
            Vote::Hard => self.label_from_parts(&[], &self.tree_labels(x)),
        }
    }
}

/// Trains a forest. Each tree draws its bootstrap sample and per-split
/// feature subsets from its own stream derived from `(seed, tree index)`,
/// so the result does not depend on how trees are scheduled across threads.
pub fn fit_forest(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> ForestModel {
    let n = features.len();
    let n_features = features.first().map_or(0, Vec::len);
    let n_trees = params.n_estimators.max(1);
    let tree_seeds: Vec<u64> = (0..n_trees as u64)
        .map(|i| rng::derive_seed(params.seed, i))
        .collect();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features,
        seed: params.seed,
    };
    let trees: Vec<TreeModel> = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            tree::fit_tree_on_rows(features, labels, n_classes, &rows, &tree_params, &mut r)
        })
        .collect();
    ForestModel {
        trees,
        n_features,
        n_classes,
        tree_seeds,
        params: ForestParams {
            n_estimators: n_trees,
            ..*params
        },
    }
}
