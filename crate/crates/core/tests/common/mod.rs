#![allow(dead_code)]

use std::path::PathBuf;

use axom_core::forest::{fit_forest, ForestModel, ForestParams, Vote};
use axom_core::tree::{fit_tree, MaxDepth, MaxFeatures, Node, TreeModel, TreeParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Random training rows on [0, 1]^p with labels that depend loosely on
/// the first feature, so trees grow real structure.
pub fn random_training(rng: &mut ChaCha8Rng, p: usize, k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = rng.random_range(20..120);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let y = if rng.random::<f64>() < 0.6 {
            ((x[0] * k as f64) as usize).min(k - 1)
        } else {
            rng.random_range(0..k)
        };
        rows.push(x);
        labels.push(y);
    }
    (rows, labels)
}

pub fn random_tree(rng: &mut ChaCha8Rng, p: usize, k: usize, max_depth: usize) -> TreeModel {
    let (rows, labels) = random_training(rng, p, k);
    let params = TreeParams {
        max_depth: MaxDepth(Some(rng.random_range(1..=max_depth))),
        min_samples_leaf: rng.random_range(1..=3),
        max_features: if rng.random::<bool>() {
            MaxFeatures::All
        } else {
            MaxFeatures::Sqrt
        },
        seed: rng.random(),
    };
    fit_tree(&rows, &labels, k, &params)
}

pub fn random_forest(
    rng: &mut ChaCha8Rng,
    p: usize,
    k: usize,
    max_depth: usize,
    max_trees: usize,
) -> ForestModel {
    let (rows, labels) = random_training(rng, p, k);
    let params = ForestParams {
        n_estimators: rng.random_range(1..=max_trees),
        max_depth: MaxDepth(Some(rng.random_range(1..=max_depth))),
        min_samples_leaf: rng.random_range(1..=3),
        max_features: MaxFeatures::Sqrt,
        seed: rng.random(),
        bootstrap: true,
        vote: Vote::Soft,
    };
    fit_forest(&rows, &labels, k, &params)
}

/// Query point that sometimes leaves the unit box.
pub fn random_input(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-0.1..1.1)).collect()
}

pub fn stump(
    feature: usize,
    threshold: f64,
    left: &[usize],
    right: &[usize],
    n_features: usize,
) -> TreeModel {
    let (l, r): (usize, usize) = (left.iter().sum(), right.iter().sum());
    TreeModel {
        nodes: vec![
            Node::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
                cover: l + r,
            },
            Node::Leaf {
                class_counts: left.to_vec(),
                cover: l,
            },
            Node::Leaf {
                class_counts: right.to_vec(),
                cover: r,
            },
        ],
        n_features,
        n_classes: left.len(),
    }
}
