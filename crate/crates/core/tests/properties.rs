mod common;

use axom_core::axom::axom_explain;
use axom_core::dataset::{normalize, split, Dataset};
use axom_core::explainers::{EnsembleShap, Scaled};
use axom_core::forest::{ForestModel, Vote};
use axom_core::heatmap::{difference_map, distance_field, ratio_map, HeatmapSpec};
use axom_core::model_io::{forest_from_json, forest_to_json, tree_from_json, tree_to_json};
use axom_core::robustness::{
    candidate_points, lattice_axis, sample_robustness, NeighborhoodMode, NeighborhoodSpec,
    NormTarget,
};
use axom_core::shap::{shap_fast, shap_forest, Explanation, OutputMode};
use axom_core::stats::{compare, paired_t, wilcoxon_signed_rank, Pairing};
use axom_core::tree::Classifier;
use common::{random_forest, random_input, random_tree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn labelled(rows: Vec<Vec<f64>>, k: usize) -> Dataset {
    let labels = (0..rows.len()).map(|i| i % k).collect();
    Dataset::new("prop", rows, labels, k).unwrap()
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..5)
        .prop_flat_map(|p| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, p), 12..60))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn efficiency_holds_for_trees(seed in any::<u64>(), p in 1usize..10, k in 2usize..6) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, p, k, 8);
        let x = random_input(&mut r, p);
        for mode in [OutputMode::Probability, OutputMode::HardIndicator] {
            let e = shap_fast(&t, &x, mode).unwrap();
            let target = match mode {
                OutputMode::Probability => t.predict_proba(&x).unwrap(),
                OutputMode::HardIndicator => {
                    let mut v = vec![0.0; k];
                    v[t.predict(&x).unwrap()] = 1.0;
                    v
                }
            };
            prop_assert!(e.efficiency_residual(&target) < 1e-9);
        }
    }

    #[test]
    fn forest_shap_is_mean_of_tree_shap(seed in any::<u64>(), p in 1usize..8) {
        let mut r = rng(seed);
        let f = random_forest(&mut r, p, 3, 6, 6);
        let x = random_input(&mut r, p);
        let parts: Vec<Explanation> = f.trees.iter().map(|t| shap_fast(t, &x, OutputMode::Probability).unwrap()).collect();
        let mean = Explanation::mean(&parts, &x);
        let forest = shap_forest(&f, &x, OutputMode::Probability).unwrap();
        prop_assert!(mean.max_abs_diff(&forest) < 1e-12);
    }

    #[test]
    fn unused_features_get_zero_attribution(seed in any::<u64>(), p in 2usize..9) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, p, 3, 5);
        let x = random_input(&mut r, p);
        let e = shap_fast(&t, &x, OutputMode::Probability).unwrap();
        let used = t.split_features();
        for a in (0..p).filter(|a| !used.contains(a)) {
            for c in 0..3 {
                prop_assert_eq!(e.phi(c, a), 0.0);
            }
        }
    }

    #[test]
    fn single_tree_axom_is_plain_shap(seed in any::<u64>(), p in 1usize..8) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, p, 3, 6);
        let f = ForestModel::from_trees(vec![t.clone()], Vote::Soft).unwrap();
        let x = random_input(&mut r, p);
        let a = axom_explain(&f, &x, OutputMode::Probability).unwrap();
        let s = shap_fast(&t, &x, OutputMode::Probability).unwrap();
        prop_assert_eq!(a.explanation.values, s.values);
    }

    #[test]
    fn model_json_round_trips(seed in any::<u64>(), p in 1usize..8) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, p, 4, 6);
        prop_assert_eq!(tree_from_json(&tree_to_json(&t)).unwrap(), t);
        let f = random_forest(&mut r, p, 3, 5, 4);
        prop_assert_eq!(forest_from_json(&forest_to_json(&f)).unwrap(), f);
    }

    #[test]
    fn split_partitions_rows(rows in rows_strategy(), k in 2usize..4, frac in 0.1f64..0.5, seed in any::<u64>()) {
        let ds = labelled(rows, k);
        let s = split(&ds, frac, seed).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.n_rows()).collect::<Vec<_>>());
        prop_assert_eq!(split(&ds, frac, seed).unwrap(), s.clone());
        // per-class proportions within one sample of the target fraction
        for c in 0..k {
            let total = ds.labels.iter().filter(|&&l| l == c).count() as f64;
            let test = s.test_indices.iter().filter(|&&i| ds.labels[i] == c).count() as f64;
            prop_assert!((test - frac * total).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn normalization_round_trips(rows in rows_strategy(), seed in any::<u64>()) {
        let ds = labelled(rows, 2);
        let s = split(&ds, 0.25, seed).unwrap();
        let Ok(n) = normalize(&ds, &s) else { return Ok(()) };
        let norm = n.normalization.as_ref().unwrap();
        for &i in &s.train_indices {
            for a in 0..ds.n_features() {
                let v = n.features[i][a];
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                prop_assert!((norm.invert(a, v) - ds.features[i][a]).abs() < 1e-12 * ds.features[i][a].abs().max(1.0) * 100.0);
            }
        }
    }

    #[test]
    fn lattice_is_symmetric_and_even_grids_skip_center(c in -1.0f64..1.0, eps in 1e-4f64..0.5, half in 1usize..40) {
        let k = 2 * half;
        let ax = lattice_axis(c, eps, k);
        prop_assert_eq!(ax.len(), k);
        prop_assert_eq!(ax[0], c - eps);
        prop_assert_eq!(ax[k - 1], c + eps);
        prop_assert!(ax.iter().all(|&v| v != c));
        prop_assert!(ax.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn candidates_stay_in_the_box(seed in any::<u64>(), p in 1usize..6, eps in 1e-3f64..0.2, grid in any::<bool>()) {
        let mut r = rng(seed);
        let center = random_input(&mut r, p);
        let spec = NeighborhoodSpec {
            epsilon: eps,
            n_points: 300,
            mode: if grid { NeighborhoodMode::Grid } else { NeighborhoodMode::Random },
            seed,
        };
        let pts = candidate_points(&center, &spec, 7).unwrap();
        for x in &pts {
            prop_assert!(x.iter().zip(&center).all(|(a, b)| (a - b).abs() <= eps * (1.0 + 1e-12)));
            prop_assert!(x != &center);
        }
        prop_assert_eq!(candidate_points(&center, &spec, 7).unwrap(), pts);
    }

    #[test]
    fn mean_ratio_never_exceeds_max_and_scales_linearly(seed in any::<u64>(), p in 1usize..5, factor in 0.1f64..10.0) {
        let mut r = rng(seed);
        let f = random_forest(&mut r, p, 3, 5, 5);
        let center = random_input(&mut r, p);
        let spec = NeighborhoodSpec { epsilon: 0.05, n_points: 200, mode: NeighborhoodMode::Random, seed };
        let g = EnsembleShap::forest(&f, OutputMode::Probability);
        let base = sample_robustness(&g, &center, &spec, 3, NormTarget::AllClasses).unwrap().into_result();
        let scaled = Scaled { inner: EnsembleShap::forest(&f, OutputMode::Probability), factor };
        let s = sample_robustness(&scaled, &center, &spec, 3, NormTarget::AllClasses).unwrap().into_result();
        if let (Ok(b), Ok(s)) = (base, s) {
            prop_assert!(b.l_bar <= b.l_max + 1e-15);
            prop_assert!((s.l_bar - factor * b.l_bar).abs() <= 1e-9 * (1.0 + s.l_bar));
        }
    }

    #[test]
    fn ratio_map_is_difference_over_distance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_forest(&mut r, 3, 2, 5, 4);
        let center = random_input(&mut r, 3);
        let spec = HeatmapSpec { epsilon: 0.1, resolution: 8 };
        let g = EnsembleShap::forest(&f, OutputMode::Probability);
        let d = difference_map(&g, &center, (0, 2), &spec).unwrap();
        let q = ratio_map(&g, &center, (0, 2), &spec).unwrap();
        let dist = distance_field(&center, (0, 2), &spec).unwrap();
        for ((dv, qv), s) in d.values.iter().zip(&q.values).zip(&dist) {
            prop_assert!(*dv >= 0.0 && *s > 0.0);
            prop_assert!((qv - dv / s).abs() <= 1e-12 * qv.abs().max(1.0));
        }
    }

    #[test]
    fn swapping_samples_negates_the_statistic(
        a in prop::collection::vec(0.0f64..5.0, 8..30),
        shift in prop::collection::vec(-1.0f64..1.0, 30),
    ) {
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        for (x, y) in [(paired_t(&a, &b), paired_t(&b, &a)), (wilcoxon_signed_rank(&a, &b), wilcoxon_signed_rank(&b, &a))] {
            let (x, y) = (x.unwrap(), y.unwrap());
            prop_assert!((x.statistic + y.statistic).abs() <= 1e-9 * x.statistic.abs().max(1.0));
            prop_assert!((x.p_value - y.p_value).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
        }
        let c = compare(&a, &b, Pairing::Paired).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.p_value));
    }
}
