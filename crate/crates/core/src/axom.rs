//! Averaging on the eXplanations Of the Majority.
//!
//! The ensemble explanation is the mean of the weak explanations of only
//! those trees whose own label equals the ensemble label.

use crate::error::Result;
use crate::forest::ForestModel;
use crate::shap::{Explanation, OutputMode, PreparedTree};
use crate::tree::{check_dim, Classifier};

#[derive(Debug, Clone, PartialEq)]
pub struct AxomExplanation {
    pub explanation: Explanation,
    pub ensemble_label: usize,
    /// Tree indices whose label matched, ascending.
    pub contributing_trees: Vec<usize>,
    pub n_discarded: usize,
    /// Set when no tree agreed and the plain forest mean was returned.
    pub fell_back: bool,
}

impl AxomExplanation {
    /// The explanation row of the ensemble label.
    pub fn predicted_row(&self) -> &[f64] {
        self.explanation.class_row(self.ensemble_label)
    }

    /// Mean probability vector of the contributing trees, the quantity the
    /// AXOM base value plus attributions reconstructs.
    pub fn contributing_proba(&self, forest: &ForestModel) -> Vec<f64> {
        let mut acc = vec![0.0; forest.n_classes];
        for &t in &self.contributing_trees {
            for (a, p) in acc
                .iter_mut()
                .zip(forest.trees[t].proba_unchecked(&self.explanation.sample))
            {
                *a += p;
            }
        }
        let m = self.contributing_trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }
}

/// Combines precomputed per-tree explanations given per-tree labels.
/// Shared by [`axom_explain`] and the cached neighborhood explainers so
/// both reduce in the same order.
pub(crate) fn combine_majority(
    parts: &[&Explanation],
    tree_labels: &[usize],
    ensemble_label: usize,
    sample: &[f64],
) -> AxomExplanation {
    let contributing: Vec<usize> = tree_labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == ensemble_label)
        .map(|(i, _)| i)
        .collect();
    if contributing.is_empty() {
        log::warn!(
            "no tree agrees with ensemble label {ensemble_label}; using the full forest mean"
        );
        return AxomExplanation {
            explanation: Explanation::mean(parts.iter().copied(), sample),
            ensemble_label,
            contributing_trees: (0..parts.len()).collect(),
            n_discarded: 0,
            fell_back: true,
        };
    }
    let explanation = Explanation::mean(contributing.iter().map(|&i| parts[i]), sample);
    AxomExplanation {
        explanation,
        ensemble_label,
        n_discarded: parts.len() - contributing.len(),
        contributing_trees: contributing,
        fell_back: false,
    }
}

pub fn axom_explain(forest: &ForestModel, x: &[f64], mode: OutputMode) -> Result<AxomExplanation> {
    check_dim(forest.n_features, x)?;
    let ensemble_label = forest.label_unchecked(x);
    let tree_labels = forest.tree_labels(x);
    let parts: Vec<Explanation> = forest
        .trees
        .iter()
        .map(|t| PreparedTree::new(t, mode).explain(x))
        .collect();
    let refs: Vec<&Explanation> = parts.iter().collect();
    Ok(combine_majority(&refs, &tree_labels, ensemble_label, x))
}

/// Share of trees whose label differs from the ensemble label, averaged
/// over the rows and expressed as a percentage.
pub fn weak_mislabeling_rate(forest: &ForestModel, rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(crate::Error::InsufficientData { needed: 1, got: 0 });
    }
    let m = forest.trees.len() as f64;
    let mut total = 0.0;
    for x in rows {
        check_dim(forest.n_features, x)?;
        let label = forest.label_unchecked(x);
        let disagree = forest
            .tree_labels(x)
            .iter()
            .filter(|&&l| l != label)
            .count();
        total += disagree as f64 / m;
    }
    Ok(100.0 * total / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Vote;
    use crate::shap::shap_forest;
    use crate::tree::{Node, TreeModel};

    fn stump(threshold: f64, left: Vec<usize>, right: Vec<usize>) -> TreeModel {
        let (lc, rc) = (left.iter().sum::<usize>(), right.iter().sum::<usize>());
        TreeModel {
            nodes: vec![
                Node::Split {
                    feature: 0,
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
            n_features: 2,
            n_classes: 2,
        }
    }

    /// Eight trees; trees 2,3,4,6,8 (1-based) vote class 0 at x = 0.3.
    fn eight_tree_forest() -> ForestModel {
        let majority = |t: f64| stump(t, vec![8, 2], vec![1, 9]);
        let minority = |t: f64| stump(t, vec![3, 7], vec![6, 4]);
        ForestModel::from_trees(
            vec![
                minority(0.5),
                majority(0.5),
                majority(0.4),
                majority(0.6),
                minority(0.45),
                majority(0.55),
                minority(0.35),
                majority(0.65),
            ],
            Vote::Hard,
        )
        .unwrap()
    }

    #[test]
    fn averages_only_the_majority() {
        let f = eight_tree_forest();
        let x = [0.3, 0.5];
        let ax = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        assert_eq!(ax.ensemble_label, 0);
        assert_eq!(ax.contributing_trees, vec![1, 2, 3, 5, 7]);
        assert_eq!(ax.n_discarded, 3);
        let parts: Vec<Explanation> = [1, 2, 3, 5, 7]
            .iter()
            .map(|&i| crate::shap::shap_fast(&f.trees[i], &x, OutputMode::Probability).unwrap())
            .collect();
        let expected = Explanation::mean(&parts, &x);
        assert_eq!(ax.explanation.values, expected.values);
        assert_eq!(ax.explanation.base_values, expected.base_values);
        let rate = weak_mislabeling_rate(&f, &[x.to_vec()]).unwrap();
        assert_eq!(rate, 37.5);
    }

    #[test]
    fn unanimous_forest_collapses_to_forest_shap() {
        let f = ForestModel::from_trees(
            vec![
                stump(0.5, vec![9, 1], vec![1, 9]),
                stump(0.6, vec![7, 3], vec![2, 8]),
            ],
            Vote::Soft,
        )
        .unwrap();
        let x = [0.1, 0.0];
        let ax = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        let rf = shap_forest(&f, &x, OutputMode::Probability).unwrap();
        assert_eq!(ax.explanation.values, rf.values);
        assert_eq!(ax.n_discarded, 0);
        assert_eq!(weak_mislabeling_rate(&f, &[x.to_vec()]).unwrap(), 0.0);
    }

    #[test]
    fn singleton_forest_is_its_tree() {
        let t = stump(0.5, vec![9, 1], vec![1, 9]);
        let f = ForestModel::from_trees(vec![t.clone()], Vote::Soft).unwrap();
        let x = [0.7, 0.2];
        let ax = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        let e = crate::shap::shap_fast(&t, &x, OutputMode::Probability).unwrap();
        assert_eq!(ax.explanation.values, e.values);
    }

    #[test]
    fn soft_vote_without_agreeing_tree_falls_back() {
        // tree labels: 0, 0, 2; mean proba favors class 1
        let leaf = |c: Vec<usize>| TreeModel::single_leaf(c, 1);
        let f = ForestModel::from_trees(
            vec![
                leaf(vec![40, 39, 21]),
                leaf(vec![40, 39, 21]),
                leaf(vec![0, 45, 55]),
            ],
            Vote::Soft,
        )
        .unwrap();
        let x = [0.0];
        assert_eq!(f.predict(&x).unwrap(), 1);
        let ax = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        assert!(ax.fell_back);
        let rf = shap_forest(&f, &x, OutputMode::Probability).unwrap();
        assert_eq!(ax.explanation.values, rf.values);
    }

    #[test]
    fn efficiency_holds_against_contributing_subset() {
        let f = eight_tree_forest();
        let x = [0.3, 0.5];
        let ax = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        let target = ax.contributing_proba(&f);
        assert!(ax.explanation.efficiency_residual(&target) < 1e-12);
        // against the full-ensemble probability the identity does not hold
        let full = f.predict_proba(&x).unwrap();
        assert!(ax.explanation.efficiency_residual(&full) > 1e-3);
    }
}
