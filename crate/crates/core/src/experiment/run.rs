use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::axom::{axom_explain, weak_mislabeling_rate};
use crate::cv::{grid_search_cv, ModelKind};
use crate::dataset::{self, Dataset, DatasetName, Split};
use crate::error::{Error, Result};
use crate::explainers::{EnsembleShap, ExplanationFunction, Method};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::heatmap::{self, HeatmapKind, HeatmapMeta};
use crate::model_io::{self, read_text, write_text};
use crate::rng::derive_seed;
use crate::robustness::{evaluate_dataset, NeighborhoodSpec, RobustnessReport};
use crate::shap::{shap_fast, shap_forest, Explanation};
use crate::stats::{compare, TestResult};
use crate::tree::{fit_tree, Classifier, TreeModel, TreeParams};

/// Stream indices under each experiment seed.
const CV_TREE: u64 = 1;
const CV_FOREST: u64 = 2;
const FIT_TREE: u64 = 3;
const FIT_FOREST: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Train,
    Robustness,
    Explanations,
    Heatmaps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub dataset: String,
    pub seed: u64,
    pub stage: Stage,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub seconds: f64,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipCount {
    pub dataset: String,
    pub seed: u64,
    pub method: Method,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub run_dir: PathBuf,
    pub crate_version: String,
    pub model_format_version: u32,
    pub config_file: String,
    pub stages: Vec<StageRecord>,
    pub tables: Vec<String>,
    pub skipped_samples: Vec<SkipCount>,
    pub complete: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            config_hash: config.hash(),
            run_dir: config.run_dir(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            model_format_version: model_io::FORMAT_VERSION,
            config_file: "config.toml".into(),
            stages: Vec::new(),
            tables: Vec::new(),
            skipped_samples: Vec::new(),
            complete: false,
            error: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() {
            path.join(Self::FILE)
        } else {
            path.to_path_buf()
        };
        let mut m: RunManifest = serde_json::from_str(&read_text(&path)?)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        // the manifest may have been moved along with its run directory
        if let Some(dir) = path.parent() {
            m.run_dir = dir.to_path_buf();
        }
        Ok(m)
    }

    fn save(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(&self.run_dir.join(Self::FILE), &text)
    }

    /// Every file the run produced, relative to the run directory.
    pub fn files(&self) -> Vec<String> {
        let mut out = vec![self.config_file.clone()];
        out.extend(self.stages.iter().flat_map(|s| s.artifacts.iter().cloned()));
        out.extend(self.tables.iter().cloned());
        out
    }

    pub fn stage(&self, dataset: &str, seed: u64, stage: Stage) -> Option<&StageRecord> {
        self.stages
            .iter()
            .find(|s| s.dataset == dataset && s.seed == seed && s.stage == stage)
    }

    fn reusable(&self, dataset: &str, seed: u64, stage: Stage) -> bool {
        self.stage(dataset, seed, stage)
            .is_some_and(|s| s.artifacts.iter().all(|a| self.run_dir.join(a).is_file()))
    }

    fn record(&mut self, rec: StageRecord) -> Result<()> {
        self.stages
            .retain(|s| !(s.dataset == rec.dataset && s.seed == rec.seed && s.stage == rec.stage));
        self.stages.push(rec);
        self.save()
    }
}

/// Cross-validation and test-set figures of the two fitted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub dataset: String,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dt_params: ForestParams,
    pub rf_params: ForestParams,
    pub dt_cv_accuracy: f64,
    pub rf_cv_accuracy: f64,
    pub dt_test_accuracy: f64,
    pub rf_test_accuracy: f64,
    /// Percentage of trees disagreeing with the forest on the test rows.
    pub weak_mislabeling_pct: f64,
}

/// A normalized dataset, its split and the fitted models.
pub struct Prepared {
    pub name: DatasetName,
    pub seed: u64,
    pub data: Dataset,
    pub split: Split,
    pub dt: TreeModel,
    pub rf: ForestModel,
    pub summary: TrainingSummary,
}

impl Prepared {
    pub fn test_rows(&self) -> Vec<Vec<f64>> {
        self.split
            .test_indices
            .iter()
            .map(|&i| self.data.features[i].clone())
            .collect()
    }

    pub fn test_ids(&self) -> Vec<u64> {
        self.split.test_indices.iter().map(|&i| i as u64).collect()
    }

    pub fn row(&self, sample_id: u64) -> Result<&[f64]> {
        self.data
            .features
            .get(sample_id as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::Config(format!(
                    "sample id {sample_id} outside 0..{}",
                    self.data.n_rows()
                ))
            })
    }
}

fn rel(dataset: &str, seed: u64, file: &str) -> String {
    format!("datasets/{dataset}/seed-{seed}/{file}")
}

fn accuracy<C: Classifier>(model: &C, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(x, &y)| model.label_unchecked(x) == y)
        .count();
    hits as f64 / rows.len() as f64
}

fn train(
    config: &ExperimentConfig,
    name: DatasetName,
    seed: u64,
    data: Dataset,
    split: Split,
) -> Result<Prepared> {
    let train = data.subset(&split.train_indices);
    let test = data.subset(&split.test_indices);
    let k = data.n_classes;
    let dt_cv = grid_search_cv(
        &train.features,
        &train.labels,
        k,
        ModelKind::Tree,
        &config.tree_grid,
        config.cv_folds,
        derive_seed(seed, CV_TREE),
        config.vote,
    )?;
    let rf_cv = grid_search_cv(
        &train.features,
        &train.labels,
        k,
        ModelKind::Forest,
        &config.forest_grid,
        config.cv_folds,
        derive_seed(seed, CV_FOREST),
        config.vote,
    )?;
    let dt_params = ForestParams {
        seed: derive_seed(seed, FIT_TREE),
        ..dt_cv.best
    };
    let dt = fit_tree(
        &train.features,
        &train.labels,
        k,
        &TreeParams {
            max_depth: dt_params.max_depth,
            min_samples_leaf: dt_params.min_samples_leaf,
            max_features: dt_params.max_features,
            seed: dt_params.seed,
        },
    );
    let rf_params = ForestParams {
        seed: derive_seed(seed, FIT_FOREST),
        ..rf_cv.best
    };
    let rf = fit_forest(&train.features, &train.labels, k, &rf_params);
    let summary = TrainingSummary {
        dataset: name.to_string(),
        seed,
        n_features: data.n_features(),
        n_classes: k,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        dt_params,
        rf_params,
        dt_cv_accuracy: dt_cv.cv_accuracy,
        rf_cv_accuracy: rf_cv.cv_accuracy,
        dt_test_accuracy: accuracy(&dt, &test.features, &test.labels),
        rf_test_accuracy: accuracy(&rf, &test.features, &test.labels),
        weak_mislabeling_pct: weak_mislabeling_rate(&rf, &test.features)?,
    };
    Ok(Prepared {
        name,
        seed,
        data,
        split,
        dt,
        rf,
        summary,
    })
}

fn load_split(config: &ExperimentConfig, name: DatasetName, seed: u64) -> Result<(Dataset, Split)> {
    let raw = dataset::load_named(name, &config.data_dir)?;
    let fraction = config
        .test_fraction
        .unwrap_or(name.schema().default_test_fraction);
    let split = dataset::split(&raw, fraction, seed)?;
    let data = dataset::normalize(&raw, &split)?;
    Ok((data, split))
}

fn train_stage(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    name: DatasetName,
    seed: u64,
) -> Result<Prepared> {
    let start = Instant::now();
    let ds = name.as_str();
    let files = ["split.json", "dt.json", "rf.json", "training.json"].map(|f| rel(ds, seed, f));
    let (data, split) = load_split(config, name, seed)?;
    let dir = &manifest.run_dir;
    if manifest.reusable(ds, seed, Stage::Train) {
        let dt = model_io::tree_from_json(&read_text(&dir.join(&files[1]))?)?;
        let rf = model_io::forest_from_json(&read_text(&dir.join(&files[2]))?)?;
        let summary: TrainingSummary = serde_json::from_str(&read_text(&dir.join(&files[3]))?)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        log::info!("{ds} seed {seed}: reusing trained models");
        return Ok(Prepared {
            name,
            seed,
            data,
            split,
            dt,
            rf,
            summary,
        });
    }
    log::info!("{ds} seed {seed}: cross-validating and training");
    let prepared = train(config, name, seed, data, split)?;
    write_text(&dir.join(&files[0]), &json(&prepared.split))?;
    write_text(&dir.join(&files[1]), &model_io::tree_to_json(&prepared.dt))?;
    write_text(
        &dir.join(&files[2]),
        &model_io::forest_to_json(&prepared.rf),
    )?;
    write_text(&dir.join(&files[3]), &json(&prepared.summary))?;
    manifest.record(StageRecord {
        dataset: ds.into(),
        seed,
        stage: Stage::Train,
        artifacts: files.to_vec(),
        seconds: start.elapsed().as_secs_f64(),
        reused: false,
    })?;
    Ok(prepared)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

/// Loads, splits, normalizes and trains one dataset for one seed, reusing
/// cached models from the run directory when present.
pub fn prepare(config: &ExperimentConfig, name: DatasetName, seed: u64) -> Result<Prepared> {
    let mut manifest = existing_manifest(config);
    write_text(
        &manifest.run_dir.join(&manifest.config_file),
        &config.to_toml(),
    )?;
    train_stage(config, &mut manifest, name, seed)
}

fn existing_manifest(config: &ExperimentConfig) -> RunManifest {
    let fresh = RunManifest::new(config);
    match RunManifest::load(&fresh.run_dir.join(RunManifest::FILE)) {
        Ok(mut m) if m.config_hash == fresh.config_hash => {
            m.run_dir = fresh.run_dir;
            m.complete = false;
            m.error = None;
            m
        }
        _ => fresh,
    }
}

pub fn neighborhood_for(config: &ExperimentConfig, seed: u64) -> NeighborhoodSpec {
    NeighborhoodSpec {
        seed: derive_seed(seed, config.neighborhood.seed),
        ..config.neighborhood
    }
}

fn robustness_stage(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    p: &Prepared,
) -> Result<RobustnessReport> {
    let start = Instant::now();
    let ds = p.name.as_str();
    let file = rel(ds, p.seed, "robustness.csv");
    let path = manifest.run_dir.join(&file);
    if manifest.reusable(ds, p.seed, Stage::Robustness) {
        log::info!("{ds} seed {}: reusing robustness sweep", p.seed);
        return RobustnessReport::read_samples_csv(&read_text(&path)?);
    }
    log::info!(
        "{ds} seed {}: robustness sweep over {} test rows",
        p.seed,
        p.split.test_indices.len()
    );
    let report = evaluate_dataset(
        ds,
        &p.dt,
        &p.rf,
        &p.test_rows(),
        &p.test_ids(),
        &neighborhood_for(config, p.seed),
        config.output_mode,
        config.norm_target,
    )?;
    let mut buf = Vec::new();
    report.write_samples_csv(&mut buf)?;
    write_text(&path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    manifest.record(StageRecord {
        dataset: ds.into(),
        seed: p.seed,
        stage: Stage::Robustness,
        artifacts: vec![file],
        seconds: start.elapsed().as_secs_f64(),
        reused: false,
    })?;
    Ok(report)
}

/// The three explanations of one row.
pub fn explain_row(
    p: &Prepared,
    x: &[f64],
    config: &ExperimentConfig,
) -> Result<Vec<(Method, usize, Explanation)>> {
    let mode = config.output_mode;
    let dt = shap_fast(&p.dt, x, mode)?;
    let rf = shap_forest(&p.rf, x, mode)?;
    let ax = axom_explain(&p.rf, x, mode)?;
    Ok(vec![
        (Method::Dt, p.dt.predict(x)?, dt),
        (Method::Rf, ax.ensemble_label, rf),
        (Method::Axom, ax.ensemble_label, ax.explanation),
    ])
}

pub const EXPLANATION_HEADER: &str = "sample_id,method,predicted,class,feature,phi,base_value";

pub fn explanation_rows(sample_id: u64, parts: &[(Method, usize, Explanation)], out: &mut String) {
    for (method, predicted, e) in parts {
        for k in 0..e.n_classes {
            for a in 0..e.n_features {
                let _ = writeln!(
                    out,
                    "{sample_id},{method},{predicted},{k},{a},{},{}",
                    e.phi(k, a),
                    e.base_values[k]
                );
            }
        }
    }
}

fn explanation_stage(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    p: &Prepared,
) -> Result<()> {
    let start = Instant::now();
    let ds = p.name.as_str();
    if manifest.reusable(ds, p.seed, Stage::Explanations) {
        return Ok(());
    }
    let rows = p.test_rows();
    let ids = p.test_ids();
    let chunks: Vec<String> = rows
        .par_iter()
        .zip(ids.par_iter())
        .map(|(x, &id)| {
            let mut s = String::new();
            explanation_rows(id, &explain_row(p, x, config)?, &mut s);
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut text = format!("{EXPLANATION_HEADER}\n");
    chunks.iter().for_each(|c| text.push_str(c));
    let file = rel(ds, p.seed, "explanations.csv");
    write_text(&manifest.run_dir.join(&file), &text)?;
    manifest.record(StageRecord {
        dataset: ds.into(),
        seed: p.seed,
        stage: Stage::Explanations,
        artifacts: vec![file],
        seconds: start.elapsed().as_secs_f64(),
        reused: false,
    })
}

/// One rendered map and where it was written.
pub struct EmittedHeatmap {
    pub method: Method,
    pub grid: heatmap::HeatmapGrid,
    pub csv: String,
    pub svg: String,
}

/// Computes and writes one heatmap family for the given methods.
pub fn emit_heatmap(
    config: &ExperimentConfig,
    p: &Prepared,
    kind: HeatmapKind,
    methods: &[Method],
    sample_id: Option<u64>,
    axes: Option<[usize; 2]>,
    run_dir: &Path,
) -> Result<Vec<EmittedHeatmap>> {
    let ds = p.name.as_str();
    let center_id = match sample_id {
        Some(id) => id,
        None => *p
            .test_ids()
            .first()
            .ok_or(Error::InsufficientData { needed: 1, got: 0 })?,
    };
    let center = p.row(center_id)?.to_vec();
    let test = p.test_rows();
    let (ax, ay) = match axes {
        Some([a, b]) => (a, b),
        None => heatmap::select_axes(&p.rf, &center, &test, &config.heatmap, config.output_mode)?,
    };
    let mode = config.output_mode;
    let dt = EnsembleShap::tree(&p.dt, mode);
    let rf = EnsembleShap::forest(&p.rf, mode);
    let axom = EnsembleShap::axom(&p.rf, mode);
    let mut out = Vec::new();
    for &method in methods {
        let g: &dyn ExplanationFunction = match method {
            Method::Dt => &dt,
            Method::Rf => &rf,
            Method::Axom => &axom,
        };
        let grid = match kind {
            HeatmapKind::Difference => {
                heatmap::difference_map(g, &center, (ax, ay), &config.heatmap)?
            }
            HeatmapKind::Ratio => heatmap::ratio_map(g, &center, (ax, ay), &config.heatmap)?,
            HeatmapKind::AveragedRatio => {
                heatmap::averaged_ratio_map(g, &test, (ax, ay), &config.heatmap)?
            }
        };
        let center_label = if kind == HeatmapKind::AveragedRatio {
            "averaged".to_string()
        } else {
            center_id.to_string()
        };
        let stem = format!(
            "heatmaps/{method}_{}_{center_label}_{ax}-{ay}",
            kind.short()
        );
        let meta = HeatmapMeta {
            dataset: ds.into(),
            method: method.to_string(),
            center: center_label.clone(),
        };
        let csv = rel(ds, p.seed, &format!("{stem}.csv"));
        let svg = rel(ds, p.seed, &format!("{stem}.svg"));
        write_text(&run_dir.join(&csv), &grid.to_csv(&meta))?;
        let title = format!(
            "{ds} {} {} (center {center_label})",
            method.display_name(),
            kind
        );
        write_text(&run_dir.join(&svg), &grid.to_svg(&title))?;
        out.push(EmittedHeatmap {
            method,
            grid,
            csv,
            svg,
        });
    }
    Ok(out)
}

fn heatmap_stage(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    p: &Prepared,
) -> Result<()> {
    let start = Instant::now();
    let ds = p.name.as_str();
    if config.heatmaps.is_empty() || manifest.reusable(ds, p.seed, Stage::Heatmaps) {
        return Ok(());
    }
    log::info!(
        "{ds} seed {}: {} heatmap request(s)",
        p.seed,
        config.heatmaps.len()
    );
    let mut artifacts = Vec::new();
    for req in &config.heatmaps {
        for h in emit_heatmap(
            config,
            p,
            req.kind,
            &req.methods,
            req.sample_id,
            req.axes,
            &manifest.run_dir,
        )? {
            artifacts.push(h.csv);
            artifacts.push(h.svg);
        }
    }
    manifest.record(StageRecord {
        dataset: ds.into(),
        seed: p.seed,
        stage: Stage::Heatmaps,
        artifacts,
        seconds: start.elapsed().as_secs_f64(),
        reused: false,
    })
}

pub const COMPARISONS: [(Method, Method); 3] = [
    (Method::Dt, Method::Rf),
    (Method::Dt, Method::Axom),
    (Method::Rf, Method::Axom),
];

pub fn comparison_label(a: Method, b: Method) -> String {
    format!("{} vs {}", a.display_name(), b.display_name())
}

/// Paired comparisons of per-sample `L_bar`; `Err` text when a test
/// cannot run (too few evaluated samples).
pub fn significance(
    config: &ExperimentConfig,
    report: &RobustnessReport,
) -> Vec<std::result::Result<TestResult, String>> {
    COMPARISONS
        .iter()
        .map(|&(a, b)| {
            let (x, y) = report.paired(a, b);
            compare(&x, &y, config.pairing)
                .map(|r| r.labeled(comparison_label(a, b)))
                .map_err(|e| e.to_string())
        })
        .collect()
}

struct SeedResult {
    summary: TrainingSummary,
    report: RobustnessReport,
    tests: Vec<std::result::Result<TestResult, String>>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub const ACCURACY_TABLE: &str = "accuracy.csv";
pub const ROBUSTNESS_TABLE: &str = "robustness_summary.csv";
pub const PVALUE_TABLE: &str = "pvalues.csv";
pub const TESTS_TABLE: &str = "significance_tests.csv";
pub const MISLABELING_TABLE: &str = "mislabeling.csv";

fn write_tables(
    manifest: &mut RunManifest,
    names: &[DatasetName],
    results: &BTreeMap<(DatasetName, u64), SeedResult>,
) -> Result<()> {
    let dir = manifest.run_dir.clone();
    let mut acc = String::from(
        "dataset,seed,n_features,n_train,n_test,dt_test_accuracy,rf_test_accuracy,dt_cv_accuracy,rf_cv_accuracy,\
         dt_max_depth,dt_min_samples_leaf,rf_n_estimators,rf_max_depth,rf_min_samples_leaf,rf_max_features\n",
    );
    let mut rob = String::from("dataset,seed,method,mean,std,n_evaluated,n_skipped\n");
    let mut tests =
        String::from("comparison,dataset,seed,test_used,statistic,p_value,n,significant_at_005\n");
    let mut mis = String::from("dataset,seed,weak_mislabeling_pct\n");
    let depth =
        |d: crate::tree::MaxDepth| d.0.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
    for ((name, seed), r) in results {
        let s = &r.summary;
        let _ = writeln!(
            acc,
            "{name},{seed},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.n_features,
            s.n_train,
            s.n_test,
            s.dt_test_accuracy,
            s.rf_test_accuracy,
            s.dt_cv_accuracy,
            s.rf_cv_accuracy,
            depth(s.dt_params.max_depth),
            s.dt_params.min_samples_leaf,
            s.rf_params.n_estimators,
            depth(s.rf_params.max_depth),
            s.rf_params.min_samples_leaf,
            s.rf_params.max_features
        );
        for a in &r.report.aggregates {
            let _ = writeln!(
                rob,
                "{name},{seed},{},{},{},{},{}",
                a.method,
                num(a.mean),
                num(a.std),
                a.n_evaluated,
                a.n_skipped
            );
        }
        for (t, &(a, b)) in r.tests.iter().zip(&COMPARISONS) {
            match t {
                Ok(t) => {
                    let _ = writeln!(
                        tests,
                        "{},{name},{seed},{},{},{},{},{}",
                        t.comparison,
                        t.test_used,
                        t.statistic,
                        t.p_value,
                        t.n,
                        t.significant_at_005
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        tests,
                        "{},{name},{seed},not_run ({}),,,,",
                        comparison_label(a, b),
                        e.replace(',', ";")
                    );
                }
            }
        }
        let _ = writeln!(mis, "{name},{seed},{}", s.weak_mislabeling_pct);
    }
    // comparisons as rows, datasets as columns, one block per seed
    let mut pv = String::from("comparison,seed");
    for n in names {
        let _ = write!(pv, ",{n},{n}_test");
    }
    pv.push('\n');
    let seeds: Vec<u64> = {
        let mut s: Vec<u64> = results.keys().map(|k| k.1).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    for seed in &seeds {
        for (i, &(a, b)) in COMPARISONS.iter().enumerate() {
            let _ = write!(pv, "{},{seed}", comparison_label(a, b));
            for n in names {
                match results.get(&(*n, *seed)).map(|r| &r.tests[i]) {
                    Some(Ok(t)) => {
                        let _ = write!(pv, ",{},{}", t.p_value, t.test_used);
                    }
                    _ => pv.push_str(",,not_run"),
                }
            }
            pv.push('\n');
        }
    }
    let mut tables = Vec::new();
    for (file, text) in [
        (ACCURACY_TABLE, acc),
        (ROBUSTNESS_TABLE, rob),
        (PVALUE_TABLE, pv),
        (TESTS_TABLE, tests),
        (MISLABELING_TABLE, mis),
    ] {
        write_text(&dir.join(file), &text)?;
        tables.push(file.to_string());
    }
    manifest.tables = tables;
    manifest.save()
}

/// Runs every stage for every configured dataset and seed. Completed
/// stages recorded in an existing manifest for the same configuration are
/// reused. On failure the manifest keeps the completed stages and the
/// error.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let names = config.validate()?;
    let mut manifest = existing_manifest(config);
    write_text(
        &manifest.run_dir.join(&manifest.config_file),
        &config.to_toml(),
    )?;
    match run_stages(config, &names, &mut manifest) {
        Ok(()) => {
            manifest.complete = true;
            manifest.save()?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            manifest.save()?;
            Err(e)
        }
    }
}

fn run_stages(
    config: &ExperimentConfig,
    names: &[DatasetName],
    manifest: &mut RunManifest,
) -> Result<()> {
    let mut results = BTreeMap::new();
    manifest.skipped_samples.clear();
    for &name in names {
        for &seed in &config.seeds {
            let prepared = train_stage(config, manifest, name, seed)?;
            let report = robustness_stage(config, manifest, &prepared)?;
            if config.explanations {
                explanation_stage(config, manifest, &prepared)?;
            }
            heatmap_stage(config, manifest, &prepared)?;
            for a in &report.aggregates {
                manifest.skipped_samples.push(SkipCount {
                    dataset: name.to_string(),
                    seed,
                    method: a.method,
                    skipped: a.n_skipped,
                });
            }
            let tests = significance(config, &report);
            results.insert(
                (name, seed),
                SeedResult {
                    summary: prepared.summary,
                    report,
                    tests,
                },
            );
        }
    }
    write_tables(manifest, names, &results)
}
