//! Same-label neighborhoods and the max / mean incremental-ratio
//! robustness of an explanation function.
//!
//! For a center `x_i` the neighborhood is a set of points in the max-norm
//! box of radius `epsilon` that receive the same predicted label. The
//! mean robustness is the average over that set of
//! `||g(x_i) - g(x_j)|| / ||x_i - x_j||`; the max robustness takes the
//! supremum instead and diverges near region boundaries.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainers::{EnsembleShap, ExplanationFunction, Method};
use crate::forest::ForestModel;
use crate::rng;
use crate::shap::OutputMode;
use crate::tree::{Classifier, TreeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodMode {
    /// i.i.d. uniform draws from the box.
    #[default]
    #[serde(alias = "uniform_random")]
    Random,
    /// Axis-aligned lattice with `floor(n_points^(1/p))` points per axis.
    Grid,
}

impl FromStr for NeighborhoodMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" | "uniform_random" => Ok(NeighborhoodMode::Random),
            "grid" => Ok(NeighborhoodMode::Grid),
            other => Err(format!(
                "unknown neighborhood mode `{other}` (expected grid or random)"
            )),
        }
    }
}

impl fmt::Display for NeighborhoodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborhoodMode::Random => "random",
            NeighborhoodMode::Grid => "grid",
        })
    }
}

/// Which part of the explanation matrix enters the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormTarget {
    /// The flattened matrix over every class.
    #[default]
    AllClasses,
    /// Only the row of the center's predicted label.
    PredictedClass,
}

impl FromStr for NormTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all-classes" => Ok(NormTarget::AllClasses),
            "predicted-class" => Ok(NormTarget::PredictedClass),
            other => Err(format!(
                "unknown norm target `{other}` (expected all-classes or predicted-class)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeighborhoodSpec {
    pub epsilon: f64,
    pub n_points: usize,
    pub mode: NeighborhoodMode,
    pub seed: u64,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec {
            epsilon: 0.01,
            n_points: 10_000,
            mode: NeighborhoodMode::Random,
            seed: 0,
        }
    }
}

impl NeighborhoodSpec {
    /// Checks the spec against a feature count.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidNeighborhood(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.n_points == 0 {
            return Err(Error::InvalidNeighborhood(
                "n_points must be at least 1".into(),
            ));
        }
        if n_features == 0 {
            return Err(Error::InvalidNeighborhood("no features".into()));
        }
        if self.mode == NeighborhoodMode::Grid && self.grid_side(n_features) < 2 {
            return Err(Error::InvalidNeighborhood(format!(
                "grid mode with {} points allows at most {} features, got {n_features}",
                self.n_points,
                usize::BITS - 1 - self.n_points.leading_zeros()
            )));
        }
        Ok(())
    }

    /// Points per axis in grid mode.
    pub fn grid_side(&self, n_features: usize) -> usize {
        integer_root(self.n_points, n_features)
    }
}

/// `floor(n^(1/p))`, exact.
pub fn integer_root(n: usize, p: usize) -> usize {
    if p == 0 {
        return 0;
    }
    if p == 1 || n <= 1 {
        return n;
    }
    let pow = |k: usize| -> Option<u128> { (k as u128).checked_pow(p as u32) };
    let mut k = (n as f64).powf(1.0 / p as f64).round() as usize;
    while k > 0 && pow(k).is_none_or(|v| v > n as u128) {
        k -= 1;
    }
    while pow(k + 1).is_some_and(|v| v <= n as u128) {
        k += 1;
    }
    k
}

/// `k` evenly spaced coordinates from `center - eps` to `center + eps`,
/// both endpoints included.
pub fn lattice_axis(center: f64, epsilon: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![center],
        _ => {
            let step = 2.0 * epsilon / (k - 1) as f64;
            (0..k)
                .map(|i| {
                    if i == k - 1 {
                        center + epsilon
                    } else {
                        center - epsilon + i as f64 * step
                    }
                })
                .collect()
        }
    }
}

/// Candidate points around `center` before label filtering. Random draws
/// use a stream derived from `(spec.seed, sample_id)`.
pub fn candidate_points(
    center: &[f64],
    spec: &NeighborhoodSpec,
    sample_id: u64,
) -> Result<Vec<Vec<f64>>> {
    let p = center.len();
    spec.validate(p)?;
    let eps = spec.epsilon;
    let points = match spec.mode {
        NeighborhoodMode::Random => {
            let mut r = rng::stream(spec.seed, sample_id);
            (0..spec.n_points)
                .map(|_| {
                    center
                        .iter()
                        .map(|c| c + r.random_range(-eps..=eps))
                        .collect::<Vec<f64>>()
                })
                .filter(|x| x.as_slice() != center)
                .collect()
        }
        NeighborhoodMode::Grid => {
            let k = spec.grid_side(p);
            let axes: Vec<Vec<f64>> = center.iter().map(|&c| lattice_axis(c, eps, k)).collect();
            let total = k.pow(p as u32);
            let mut out = Vec::with_capacity(total);
            let mut digits = vec![0usize; p];
            for _ in 0..total {
                let x: Vec<f64> = digits
                    .iter()
                    .enumerate()
                    .map(|(a, &d)| axes[a][d])
                    .collect();
                if x.as_slice() != center {
                    out.push(x);
                }
                // last axis varies fastest
                for a in (0..p).rev() {
                    digits[a] += 1;
                    if digits[a] < k {
                        break;
                    }
                    digits[a] = 0;
                }
            }
            out
        }
    };
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: Vec<f64>,
    /// Kept points, all sharing the center's label.
    pub points: Vec<Vec<f64>>,
    pub rejected: usize,
}

impl Neighborhood {
    pub fn kept(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The label-filtered neighborhood `N_{f,eps}(x_i)` of a predictor.
pub fn make_neighborhood<C: Classifier + ?Sized>(
    model: &C,
    center: &[f64],
    spec: &NeighborhoodSpec,
    sample_id: u64,
) -> Result<Neighborhood> {
    let label = model.predict(center)?;
    let (points, rejected): (Vec<_>, Vec<_>) = candidate_points(center, spec, sample_id)?
        .into_iter()
        .partition(|x| model.label_unchecked(x) == label);
    Ok(Neighborhood {
        center: center.to_vec(),
        points,
        rejected: rejected.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRobustness {
    pub l_bar: f64,
    pub l_max: f64,
    pub kept: usize,
    pub rejected: usize,
}

/// Result for one center: either both metrics or a skip when every
/// neighbor changed label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Evaluated(SampleRobustness),
    Skipped { rejected: usize },
}

impl Outcome {
    pub fn evaluated(&self) -> Option<&SampleRobustness> {
        match self {
            Outcome::Evaluated(s) => Some(s),
            Outcome::Skipped { .. } => None,
        }
    }

    pub fn into_result(self) -> Result<SampleRobustness> {
        match self {
            Outcome::Evaluated(s) => Ok(s),
            Outcome::Skipped { rejected } => Err(Error::EmptyNeighborhood { rejected }),
        }
    }
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn target_slice(g: &[f64], label: usize, n_features: usize, target: NormTarget) -> &[f64] {
    match target {
        NormTarget::AllClasses => g,
        NormTarget::PredictedClass => &g[label * n_features..(label + 1) * n_features],
    }
}

/// Both metrics over explicit candidate points. Candidates whose label
/// differs from the center's are rejected; ratios accumulate in candidate
/// order.
pub fn robustness_over(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    candidates: &[Vec<f64>],
    target: NormTarget,
) -> Outcome {
    let radius = candidates
        .iter()
        .flat_map(|x| x.iter().zip(center).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let p = explain_fn.n_features();
    let mut local = explain_fn.local(center, radius);
    let label = local.label(center);
    let g_center = local.explain(center);
    let g0 = target_slice(&g_center, label, p, target);
    let (mut sum, mut max, mut kept, mut rejected) = (0.0, 0.0f64, 0usize, 0usize);
    for x in candidates {
        if local.label(x) != label {
            rejected += 1;
            continue;
        }
        let g = local.explain(x);
        let ratio = l2_diff(g0, target_slice(&g, label, p, target)) / l2_diff(center, x);
        sum += ratio;
        max = max.max(ratio);
        kept += 1;
    }
    if kept == 0 {
        return Outcome::Skipped { rejected };
    }
    Outcome::Evaluated(SampleRobustness {
        l_bar: sum / kept as f64,
        l_max: max,
        kept,
        rejected,
    })
}

/// Both metrics on the neighborhood generated from `spec`.
pub fn sample_robustness(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    spec: &NeighborhoodSpec,
    sample_id: u64,
    target: NormTarget,
) -> Result<Outcome> {
    if center.len() != explain_fn.n_features() {
        return Err(Error::DimensionMismatch {
            expected: explain_fn.n_features(),
            actual: center.len(),
        });
    }
    let candidates = candidate_points(center, spec, sample_id)?;
    Ok(robustness_over(explain_fn, center, &candidates, target))
}

/// Mean incremental ratio over the same-label neighborhood.
pub fn mean_robustness(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    spec: &NeighborhoodSpec,
    sample_id: u64,
    target: NormTarget,
) -> Result<f64> {
    Ok(
        sample_robustness(explain_fn, center, spec, sample_id, target)?
            .into_result()?
            .l_bar,
    )
}

/// Largest incremental ratio over the same-label neighborhood.
pub fn max_robustness(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    spec: &NeighborhoodSpec,
    sample_id: u64,
    target: NormTarget,
) -> Result<f64> {
    Ok(
        sample_robustness(explain_fn, center, spec, sample_id, target)?
            .into_result()?
            .l_max,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub dataset: String,
    pub method: Method,
    pub sample_id: u64,
    /// `None` when the sample was skipped.
    pub l_bar: Option<f64>,
    pub l_max: Option<f64>,
    pub kept: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub mean: f64,
    /// Population standard deviation of the per-sample values.
    pub std: f64,
    pub n_evaluated: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub dataset: String,
    /// Ordered by method, then by sample position.
    pub records: Vec<SampleRecord>,
    pub aggregates: Vec<MethodAggregate>,
}

/// Mean and population standard deviation, summed in order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl RobustnessReport {
    pub fn records_for(&self, method: Method) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn aggregate(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    /// Per-sample `L_bar` of two methods on the samples where both were
    /// evaluated, in sample order.
    pub fn paired(&self, a: Method, b: Method) -> (Vec<f64>, Vec<f64>) {
        let lookup = |m: Method| -> Vec<(u64, Option<f64>)> {
            self.records_for(m)
                .map(|r| (r.sample_id, r.l_bar))
                .collect()
        };
        let (ra, rb) = (lookup(a), lookup(b));
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (id, va) in &ra {
            if let (Some(va), Some((_, Some(vb)))) = (va, rb.iter().find(|(j, _)| j == id)) {
                xs.push(*va);
                ys.push(*vb);
            }
        }
        (xs, ys)
    }

    fn from_records(dataset: &str, methods: &[Method], records: Vec<SampleRecord>) -> Self {
        let aggregates = methods
            .iter()
            .map(|&m| {
                let values: Vec<f64> = records
                    .iter()
                    .filter(|r| r.method == m)
                    .filter_map(|r| r.l_bar)
                    .collect();
                let skipped = records
                    .iter()
                    .filter(|r| r.method == m && r.l_bar.is_none())
                    .count();
                let (mean, std) = mean_std(&values);
                MethodAggregate {
                    method: m,
                    mean,
                    std,
                    n_evaluated: values.len(),
                    n_skipped: skipped,
                }
            })
            .collect();
        RobustnessReport {
            dataset: dataset.to_string(),
            records,
            aggregates,
        }
    }

    /// Per-sample CSV: dataset, method, sample_id, L_bar, L_max, kept, rejected.
    /// Skipped samples have empty metric cells.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Report(e.to_string());
        w.write_record([
            "dataset",
            "method",
            "sample_id",
            "L_bar",
            "L_max",
            "kept",
            "rejected",
        ])
        .map_err(io)?;
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.dataset.clone(),
                r.method.to_string(),
                r.sample_id.to_string(),
                cell(r.l_bar),
                cell(r.l_max),
                r.kept.to_string(),
                r.rejected.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Report(e.to_string()))
    }

    pub fn read_samples_csv(text: &str) -> Result<RobustnessReport> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let bad = |m: String| Error::Report(format!("robustness csv: {m}"));
        let mut records = Vec::new();
        for row in rd.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing column {i}")));
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|_| bad(format!("bad number `{s}`")))
                }
            };
            records.push(SampleRecord {
                dataset: field(0)?.to_string(),
                method: field(1)?.parse().map_err(bad)?,
                sample_id: field(2)?.parse().map_err(|_| bad("bad sample id".into()))?,
                l_bar: opt(field(3)?)?,
                l_max: opt(field(4)?)?,
                kept: field(5)?
                    .parse()
                    .map_err(|_| bad("bad kept count".into()))?,
                rejected: field(6)?
                    .parse()
                    .map_err(|_| bad("bad rejected count".into()))?,
            });
        }
        let dataset = records
            .first()
            .map(|r| r.dataset.clone())
            .unwrap_or_default();
        let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
        methods.dedup();
        Ok(RobustnessReport::from_records(&dataset, &methods, records))
    }
}

/// Evaluates each named explanation function on every test row.
/// `sample_ids` seed the per-sample neighbor streams.
pub fn evaluate_functions(
    dataset: &str,
    functions: &[(Method, &dyn ExplanationFunction)],
    test: &[Vec<f64>],
    sample_ids: &[u64],
    spec: &NeighborhoodSpec,
    target: NormTarget,
) -> Result<RobustnessReport> {
    if test.len() != sample_ids.len() {
        return Err(Error::LengthMismatch(test.len(), sample_ids.len()));
    }
    if let Some(first) = test.first() {
        spec.validate(first.len())?;
    }
    let per_sample: Vec<Vec<Outcome>> = test
        .par_iter()
        .zip(sample_ids.par_iter())
        .map(|(x, &id)| {
            let candidates = candidate_points(x, spec, id)?;
            Ok(functions
                .iter()
                .map(|(_, f)| robustness_over(*f, x, &candidates, target))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(functions.len() * test.len());
    for (m, (method, _)) in functions.iter().enumerate() {
        for (outcomes, &id) in per_sample.iter().zip(sample_ids) {
            let (l_bar, l_max, kept, rejected) = match outcomes[m] {
                Outcome::Evaluated(s) => (Some(s.l_bar), Some(s.l_max), s.kept, s.rejected),
                Outcome::Skipped { rejected } => (None, None, 0, rejected),
            };
            records.push(SampleRecord {
                dataset: dataset.to_string(),
                method: *method,
                sample_id: id,
                l_bar,
                l_max,
                kept,
                rejected,
            });
        }
    }
    let methods: Vec<Method> = functions.iter().map(|(m, _)| *m).collect();
    Ok(RobustnessReport::from_records(dataset, &methods, records))
}

/// DT SHAP, RF SHAP and AXOM on the same test rows and neighborhoods.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_dataset(
    dataset: &str,
    dt: &TreeModel,
    rf: &ForestModel,
    test: &[Vec<f64>],
    sample_ids: &[u64],
    spec: &NeighborhoodSpec,
    mode: OutputMode,
    target: NormTarget,
) -> Result<RobustnessReport> {
    let g_dt = EnsembleShap::tree(dt, mode);
    let g_rf = EnsembleShap::forest(rf, mode);
    let g_ax = EnsembleShap::axom(rf, mode);
    evaluate_functions(
        dataset,
        &[
            (Method::Dt, &g_dt),
            (Method::Rf, &g_rf),
            (Method::Axom, &g_ax),
        ],
        test,
        sample_ids,
        spec,
        target,
    )
}
