//! Grid-search k-fold cross-validation on accuracy.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams, Vote};
use crate::rng;
use crate::tree::{fit_tree_on_rows, Classifier, MaxDepth, MaxFeatures, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Forest,
}

/// Cartesian hyperparameter grid. `n_estimators` is ignored for trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<MaxDepth>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl ParamGrid {
    pub fn default_forest() -> Self {
        ParamGrid {
            n_estimators: vec![50, 100, 200],
            max_depth: vec![
                MaxDepth(Some(3)),
                MaxDepth(Some(5)),
                MaxDepth(Some(8)),
                MaxDepth::UNLIMITED,
            ],
            min_samples_leaf: vec![1, 3, 5],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::All],
        }
    }

    pub fn default_tree() -> Self {
        ParamGrid {
            n_estimators: vec![1],
            max_features: vec![MaxFeatures::All],
            ..Self::default_forest()
        }
    }

    pub fn single(params: ForestParams) -> Self {
        ParamGrid {
            n_estimators: vec![params.n_estimators],
            max_depth: vec![params.max_depth],
            min_samples_leaf: vec![params.min_samples_leaf],
            max_features: vec![params.max_features],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_estimators.is_empty()
            || self.max_depth.is_empty()
            || self.min_samples_leaf.is_empty()
            || self.max_features.is_empty()
    }

    /// All grid points in a fixed nested order.
    pub fn points(&self, kind: ModelKind, seed: u64, vote: Vote) -> Vec<ForestParams> {
        let estimators: &[usize] = match kind {
            ModelKind::Tree => &[1],
            ModelKind::Forest => &self.n_estimators,
        };
        let mut out = Vec::new();
        for &n_estimators in estimators {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for &max_features in &self.max_features {
                        out.push(ForestParams {
                            n_estimators,
                            max_depth,
                            min_samples_leaf,
                            max_features,
                            seed,
                            bootstrap: kind == ModelKind::Forest,
                            vote,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: ForestParams,
    pub cv_accuracy: f64,
    pub stratified: bool,
    /// Mean fold accuracy of every grid point, in grid order.
    pub scores: Vec<(ForestParams, f64)>,
}

/// Assigns every row to one of `k` folds. Stratified (round-robin within
/// each shuffled class) unless some class has fewer than `k` rows, in which
/// case a plain shuffled partition is used.
pub fn make_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> (Vec<Vec<usize>>, bool) {
    let mut r = rng::stream(seed, 0xF01D);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let stratified = by_class.iter().all(|c| c.is_empty() || c.len() >= k);
    let mut folds = vec![Vec::new(); k];
    if stratified {
        let mut next = 0;
        for members in &mut by_class {
            members.shuffle(&mut r);
            for &i in members.iter() {
                folds[next % k].push(i);
                next += 1;
            }
        }
    } else {
        log::warn!("a class has fewer than {k} rows; falling back to unstratified folds");
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut r);
        for (j, i) in all.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    (folds, stratified)
}

fn fold_accuracy(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    kind: ModelKind,
    params: &ForestParams,
    train: &[usize],
    test: &[usize],
) -> f64 {
    let correct = match kind {
        ModelKind::Tree => {
            let tp = TreeParams {
                max_depth: params.max_depth,
                min_samples_leaf: params.min_samples_leaf,
                max_features: params.max_features,
                seed: params.seed,
            };
            let mut r = rng::stream(params.seed, 0);
            let t = fit_tree_on_rows(features, labels, n_classes, train, &tp, &mut r);
            test.iter()
                .filter(|&&i| t.label_unchecked(&features[i]) == labels[i])
                .count()
        }
        ModelKind::Forest => {
            let xs: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
            let ys: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let f = fit_forest(&xs, &ys, n_classes, params);
            test.iter()
                .filter(|&&i| f.label_unchecked(&features[i]) == labels[i])
                .count()
        }
    };
    correct as f64 / test.len() as f64
}

/// Ordering key of a grid point among equally accurate ones: smaller
/// models first (fewer trees, then shallower, then larger leaves, then
/// fewer candidate features).
fn size_key(
    p: &ForestParams,
    n_features: usize,
) -> (usize, usize, std::cmp::Reverse<usize>, usize) {
    (
        p.n_estimators,
        p.max_depth.rank(),
        std::cmp::Reverse(p.min_samples_leaf),
        p.max_features.resolve(n_features),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn grid_search_cv(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    kind: ModelKind,
    grid: &ParamGrid,
    k_folds: usize,
    seed: u64,
    vote: Vote,
) -> Result<CvResult> {
    if k_folds < 2 {
        return Err(Error::Config(format!(
            "k_folds must be at least 2, got {k_folds}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }
    if features.len() < k_folds {
        return Err(Error::InsufficientData {
            needed: k_folds,
            got: features.len(),
        });
    }
    let n_features = features.first().map_or(0, Vec::len);
    let (folds, stratified) = make_folds(labels, n_classes, k_folds, seed);
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = (0..k_folds)
        .map(|f| {
            let train: Vec<usize> = (0..k_folds)
                .filter(|&g| g != f)
                .flat_map(|g| folds[g].iter().copied())
                .collect::<Vec<_>>();
            let mut train = train;
            train.sort_unstable();
            (train, &folds[f])
        })
        .collect();

    let points = grid.points(kind, seed, vote);
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..k_folds).map(move |f| (p, f)))
        .collect();
    let accs: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (train, test) = &splits[f];
            fold_accuracy(features, labels, n_classes, kind, &points[p], train, test)
        })
        .collect();

    let scores: Vec<(ForestParams, f64)> = points
        .iter()
        .enumerate()
        .map(|(p, params)| {
            let sum: f64 = accs[p * k_folds..(p + 1) * k_folds].iter().sum();
            (*params, sum / k_folds as f64)
        })
        .collect();

    let mut best = 0;
    for (i, (params, acc)) in scores.iter().enumerate().skip(1) {
        let (bp, bacc) = &scores[best];
        if *acc > *bacc
            || (*acc == *bacc && size_key(params, n_features) < size_key(bp, n_features))
        {
            best = i;
        }
    }
    Ok(CvResult {
        best: scores[best].0,
        cv_accuracy: scores[best].1,
        stratified,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn singleton_grid_returns_its_point() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let p = ForestParams {
            n_estimators: 3,
            max_depth: MaxDepth(Some(2)),
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 5,
            bootstrap: true,
            vote: Vote::Soft,
        };
        let r = grid_search_cv(
            &x,
            &y,
            2,
            ModelKind::Forest,
            &ParamGrid::single(p),
            5,
            5,
            Vote::Soft,
        )
        .unwrap();
        assert_eq!(r.best, p);
    }

    #[test]
    fn separable_data_prefers_the_stump() {
        // two well-separated blobs: a depth-1 split is already perfect
        let mut r = rng::stream(1, 1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let k = i % 2;
            x.push(vec![
                k as f64 * 10.0 + r.random_range(-1.0..1.0),
                r.random_range(0.0..1.0),
            ]);
            y.push(k);
        }
        let grid = ParamGrid {
            n_estimators: vec![1],
            max_depth: vec![MaxDepth(Some(1)), MaxDepth(Some(5))],
            min_samples_leaf: vec![1],
            max_features: vec![MaxFeatures::All],
        };
        let res = grid_search_cv(&x, &y, 2, ModelKind::Tree, &grid, 5, 0, Vote::Soft).unwrap();
        assert_eq!(res.cv_accuracy, 1.0);
        assert_eq!(res.best.max_depth, MaxDepth(Some(1)));
        assert!(res.stratified);
    }

    #[test]
    fn rare_class_downgrades_to_unstratified() {
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        let (folds, stratified) = make_folds(&labels, 2, 5, 0);
        assert!(!stratified);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = vec![vec![0.0]; 10];
        let y = vec![0; 10];
        assert!(grid_search_cv(
            &x,
            &y,
            1,
            ModelKind::Tree,
            &ParamGrid::default_tree(),
            1,
            0,
            Vote::Soft
        )
        .is_err());
        let empty = ParamGrid {
            max_depth: vec![],
            ..ParamGrid::default_tree()
        };
        assert!(grid_search_cv(&x, &y, 1, ModelKind::Tree, &empty, 5, 0, Vote::Soft).is_err());
    }
}
