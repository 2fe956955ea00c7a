use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cv::ParamGrid;
use crate::dataset::DatasetName;
use crate::error::{Error, Result};
use crate::explainers::Method;
use crate::forest::Vote;
use crate::heatmap::{HeatmapKind, HeatmapSpec};
use crate::robustness::{NeighborhoodMode, NeighborhoodSpec, NormTarget};
use crate::shap::OutputMode;
use crate::stats::Pairing;

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapRequest {
    pub kind: HeatmapKind,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    /// Dataset row used as the center; the first test row when absent.
    /// Averaged maps use it only for axis selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<u64>,
    /// Manual axes; selected automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<String>,
    pub data_dir: PathBuf,
    /// Runs are written to `output_dir/<config hash>/`.
    pub output_dir: PathBuf,
    /// One full experiment per seed; each drives the split, CV folds,
    /// model fitting and neighborhood draws.
    pub seeds: Vec<u64>,
    /// Per-dataset default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    pub cv_folds: usize,
    pub vote: Vote,
    pub output_mode: OutputMode,
    pub norm_target: NormTarget,
    pub pairing: Pairing,
    pub explanations: bool,
    pub neighborhood: NeighborhoodSpec,
    pub heatmap: HeatmapSpec,
    pub tree_grid: ParamGrid,
    pub forest_grid: ParamGrid,
    pub heatmaps: Vec<HeatmapRequest>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: DatasetName::ALL
                .iter()
                .map(|d| d.as_str().to_string())
                .collect(),
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("runs"),
            seeds: vec![0],
            test_fraction: None,
            cv_folds: 5,
            vote: Vote::Soft,
            output_mode: OutputMode::Probability,
            norm_target: NormTarget::AllClasses,
            pairing: Pairing::Paired,
            explanations: true,
            neighborhood: NeighborhoodSpec::default(),
            heatmap: HeatmapSpec::default(),
            tree_grid: ParamGrid::default_tree(),
            forest_grid: ParamGrid::default_forest(),
            heatmaps: vec![
                HeatmapRequest {
                    kind: HeatmapKind::Difference,
                    methods: all_methods(),
                    sample_id: None,
                    axes: None,
                },
                HeatmapRequest {
                    kind: HeatmapKind::Ratio,
                    methods: all_methods(),
                    sample_id: None,
                    axes: None,
                },
                HeatmapRequest {
                    kind: HeatmapKind::AveragedRatio,
                    methods: all_methods(),
                    sample_id: None,
                    axes: None,
                },
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering; parsing it back yields an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical form with `output_dir` cleared, truncated
    /// to 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.hash())
    }

    pub fn dataset_names(&self) -> Result<Vec<DatasetName>> {
        self.datasets.iter().map(|d| d.parse()).collect()
    }

    /// Checks everything that can be checked without training: names,
    /// numeric ranges, grids, neighborhood geometry per dataset and the
    /// presence of the data files.
    pub fn validate(&self) -> Result<Vec<DatasetName>> {
        let names = self.dataset_names()?;
        if names.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        let mut seen = names.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != names.len() {
            return Err(Error::Config("duplicate dataset names".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds configured".into()));
        }
        if let Some(f) = self.test_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("test_fraction {f} outside (0, 1)")));
            }
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!(
                "cv_folds must be at least 2, got {}",
                self.cv_folds
            )));
        }
        if self.tree_grid.is_empty() || self.forest_grid.is_empty() {
            return Err(Error::Config("parameter grids must not be empty".into()));
        }
        if self.forest_grid.n_estimators.contains(&0)
            || self.tree_grid.min_samples_leaf.contains(&0)
            || self.forest_grid.min_samples_leaf.contains(&0)
        {
            return Err(Error::Config(
                "n_estimators and min_samples_leaf must be positive".into(),
            ));
        }
        self.heatmap.validate()?;
        for name in &names {
            let schema = name.schema();
            let p = schema.feature_names.len();
            self.neighborhood
                .validate(p)
                .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            for h in &self.heatmaps {
                if h.methods.is_empty() {
                    return Err(Error::Config("heatmap request without methods".into()));
                }
                if let Some([a, b]) = h.axes {
                    if a == b || a >= p || b >= p {
                        return Err(Error::Config(format!(
                            "{name}: heatmap axes ({a}, {b}) invalid for {p} features"
                        )));
                    }
                }
            }
            let path = self.data_dir.join(&schema.file_name);
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "data file for `{name}` not found at {} (source: {})",
                    path.display(),
                    schema.url
                )));
            }
        }
        Ok(names)
    }

    /// Overrides the neighborhood with explicit values; `None` keeps the
    /// configured one.
    pub fn with_neighborhood(
        mut self,
        epsilon: Option<f64>,
        n_points: Option<usize>,
        mode: Option<NeighborhoodMode>,
    ) -> Self {
        if let Some(e) = epsilon {
            self.neighborhood.epsilon = e;
            self.heatmap.epsilon = e;
        }
        if let Some(n) = n_points {
            self.neighborhood.n_points = n;
        }
        if let Some(m) = mode {
            self.neighborhood.mode = m;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{MaxDepth, MaxFeatures};

    #[test]
    fn canonical_form_round_trips() {
        let mut c = ExperimentConfig::default();
        c.test_fraction = Some(0.2);
        c.forest_grid.max_features = vec![MaxFeatures::Count(3), MaxFeatures::Sqrt];
        c.heatmaps[0].axes = Some([1, 4]);
        let text = c.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
        assert!(text.contains("\"none\""));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = ExperimentConfig {
            seeds: vec![1],
            ..a.clone()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn partial_files_take_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            datasets = ["wine"]
            seeds = [3, 4]
            [neighborhood]
            n_points = 500
            mode = "grid"
            [tree_grid]
            n_estimators = [1]
            max_depth = [2, "none"]
            min_samples_leaf = [1]
            max_features = ["all"]
            "#,
        )
        .unwrap();
        assert_eq!(c.seeds, vec![3, 4]);
        assert_eq!(c.neighborhood.epsilon, 0.01);
        assert_eq!(c.neighborhood.mode, NeighborhoodMode::Grid);
        assert_eq!(
            c.tree_grid.max_depth,
            vec![MaxDepth(Some(2)), MaxDepth::UNLIMITED]
        );
        assert_eq!(c.forest_grid, ParamGrid::default_forest());
    }

    #[test]
    fn unknown_names_and_fields_are_rejected() {
        let c = ExperimentConfig {
            datasets: vec!["iris".into()],
            ..ExperimentConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml("colour = 3").is_err());
    }

    #[test]
    fn grid_mode_feature_cap_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("wine.data"), "").unwrap();
        let c = ExperimentConfig {
            datasets: vec!["wine".into()],
            data_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        }
        .with_neighborhood(None, Some(1000), Some(NeighborhoodMode::Grid));
        // 13 features need at least 2^13 points
        assert!(c.validate().is_err());
        let ok = c.with_neighborhood(None, Some(10_000), None);
        assert!(ok.validate().is_ok());
    }
}
