//! Explanation-difference and incremental-ratio maps over a square
//! lattice on two feature axes around a center, and the map averaged over
//! a whole test set. CSV is the primary artifact, SVG a rendering of it.
//!
//! Unlike the robustness neighborhoods, maps are not label filtered: they
//! show the region boundaries, label changes included.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainers::ExplanationFunction;
use crate::forest::ForestModel;
use crate::robustness::lattice_axis;
use crate::shap::{shap_forest, OutputMode};
use crate::tree::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapKind {
    #[serde(alias = "diff")]
    Difference,
    Ratio,
    #[serde(alias = "avg")]
    AveragedRatio,
}

impl HeatmapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeatmapKind::Difference => "difference",
            HeatmapKind::Ratio => "ratio",
            HeatmapKind::AveragedRatio => "averaged_ratio",
        }
    }

    /// Short name used by the CLI and in file names.
    pub fn short(self) -> &'static str {
        match self {
            HeatmapKind::Difference => "diff",
            HeatmapKind::Ratio => "ratio",
            HeatmapKind::AveragedRatio => "avg",
        }
    }
}

impl fmt::Display for HeatmapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeatmapKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "diff" | "difference" => Ok(HeatmapKind::Difference),
            "ratio" => Ok(HeatmapKind::Ratio),
            "avg" | "averaged" | "averaged_ratio" => Ok(HeatmapKind::AveragedRatio),
            other => Err(format!(
                "unknown heatmap kind `{other}` (expected diff, ratio or avg)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSpec {
    pub epsilon: f64,
    /// Points per axis; must be even so the center is never a lattice point.
    pub resolution: usize,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        HeatmapSpec {
            epsilon: 0.01,
            resolution: 100,
        }
    }
}

impl HeatmapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidHeatmap(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.resolution < 2 || !self.resolution.is_multiple_of(2) {
            return Err(Error::InvalidHeatmap(format!(
                "resolution must be even and at least 2, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Lattice offsets from the center along one axis.
    pub fn offsets(&self) -> Vec<f64> {
        lattice_axis(0.0, self.epsilon, self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub kind: HeatmapKind,
    pub axis_x: usize,
    pub axis_y: usize,
    pub rows: usize,
    pub cols: usize,
    pub epsilon: f64,
    /// Row-major; row `r` follows `axis_y`, column `c` follows `axis_x`.
    pub values: Vec<f64>,
    /// Absent for averaged maps.
    pub center: Option<Vec<f64>>,
}

impl HeatmapGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Number of distinct values after rounding to `tol`.
    pub fn distinct_levels(&self, tol: f64) -> usize {
        let mut keys: Vec<i64> = self
            .values
            .iter()
            .map(|v| (v / tol).round() as i64)
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

/// `x` with coordinates `axis_x` and `axis_y` replaced by `point`.
pub fn embed_point(x: &[f64], point: (f64, f64), axis_x: usize, axis_y: usize) -> Result<Vec<f64>> {
    check_axes(x.len(), axis_x, axis_y)?;
    let mut out = x.to_vec();
    out[axis_x] = point.0;
    out[axis_y] = point.1;
    Ok(out)
}

fn check_axes(p: usize, axis_x: usize, axis_y: usize) -> Result<()> {
    if axis_x == axis_y {
        return Err(Error::InvalidHeatmap(format!(
            "axes must differ, got {axis_x} twice"
        )));
    }
    if axis_x >= p || axis_y >= p {
        return Err(Error::InvalidHeatmap(format!(
            "axes ({axis_x}, {axis_y}) out of range for {p} features"
        )));
    }
    Ok(())
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cell-wise explanation difference and input distance.
fn evaluate_cells(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    axes: (usize, usize),
    spec: &HeatmapSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    if center.len() != explain_fn.n_features() {
        return Err(Error::DimensionMismatch {
            expected: explain_fn.n_features(),
            actual: center.len(),
        });
    }
    check_axes(center.len(), axes.0, axes.1)?;
    let xs = lattice_axis(center[axes.0], spec.epsilon, spec.resolution);
    let ys = lattice_axis(center[axes.1], spec.epsilon, spec.resolution);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = ys
        .par_iter()
        .map(|&y| {
            let mut local = explain_fn.local(center, spec.epsilon);
            let g0 = local.explain(center);
            let mut diff = Vec::with_capacity(xs.len());
            let mut dist = Vec::with_capacity(xs.len());
            for &x in &xs {
                let mut q = center.to_vec();
                q[axes.0] = x;
                q[axes.1] = y;
                diff.push(l2_diff(&g0, &local.explain(&q)));
                dist.push(l2_diff(center, &q));
            }
            (diff, dist)
        })
        .collect();
    let (mut diff, mut dist) = (Vec::new(), Vec::new());
    for (d, s) in rows {
        diff.extend(d);
        dist.extend(s);
    }
    Ok((diff, dist))
}

fn grid(
    kind: HeatmapKind,
    axes: (usize, usize),
    spec: &HeatmapSpec,
    values: Vec<f64>,
    center: Option<&[f64]>,
) -> HeatmapGrid {
    HeatmapGrid {
        kind,
        axis_x: axes.0,
        axis_y: axes.1,
        rows: spec.resolution,
        cols: spec.resolution,
        epsilon: spec.epsilon,
        values,
        center: center.map(<[f64]>::to_vec),
    }
}

/// Euclidean distance from the center of every lattice cell.
pub fn distance_field(
    center: &[f64],
    axes: (usize, usize),
    spec: &HeatmapSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_axes(center.len(), axes.0, axes.1)?;
    let xs = lattice_axis(center[axes.0], spec.epsilon, spec.resolution);
    let ys = lattice_axis(center[axes.1], spec.epsilon, spec.resolution);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let mut q = center.to_vec();
            q[axes.0] = x;
            q[axes.1] = y;
            out.push(l2_diff(center, &q));
        }
    }
    Ok(out)
}

pub fn difference_map(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    axes: (usize, usize),
    spec: &HeatmapSpec,
) -> Result<HeatmapGrid> {
    let (diff, _) = evaluate_cells(explain_fn, center, axes, spec)?;
    Ok(grid(
        HeatmapKind::Difference,
        axes,
        spec,
        diff,
        Some(center),
    ))
}

pub fn ratio_map(
    explain_fn: &dyn ExplanationFunction,
    center: &[f64],
    axes: (usize, usize),
    spec: &HeatmapSpec,
) -> Result<HeatmapGrid> {
    let (diff, dist) = evaluate_cells(explain_fn, center, axes, spec)?;
    let values = diff.iter().zip(&dist).map(|(d, s)| d / s).collect();
    Ok(grid(HeatmapKind::Ratio, axes, spec, values, Some(center)))
}

/// Mean over every test row of its ratio map, cell by cell at equal offsets.
pub fn averaged_ratio_map(
    explain_fn: &dyn ExplanationFunction,
    test: &[Vec<f64>],
    axes: (usize, usize),
    spec: &HeatmapSpec,
) -> Result<HeatmapGrid> {
    if test.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut acc = vec![0.0; spec.resolution * spec.resolution];
    for x in test {
        let m = ratio_map(explain_fn, x, axes, spec)?;
        for (a, v) in acc.iter_mut().zip(&m.values) {
            *a += v;
        }
    }
    let n = test.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(grid(HeatmapKind::AveragedRatio, axes, spec, acc, None))
}

/// Picks two axes for a map centered on `center`.
///
/// The four features with the largest mean |SHAP| over `reference` are
/// candidates; of those, the two whose single-axis sweeps change the
/// forest's label at the fewest lattice points win. Ties go to the more
/// significant feature, then the lower index. Returned in ascending order.
pub fn select_axes(
    forest: &ForestModel,
    center: &[f64],
    reference: &[Vec<f64>],
    spec: &HeatmapSpec,
    mode: OutputMode,
) -> Result<(usize, usize)> {
    let p = forest.n_features;
    if p < 2 {
        return Err(Error::InvalidHeatmap(format!(
            "need at least 2 features, got {p}"
        )));
    }
    spec.validate()?;
    let label = forest.predict(center)?;
    if p == 2 {
        return Ok((0, 1));
    }
    let per_row: Vec<Vec<f64>> = reference
        .par_iter()
        .map(|x| {
            let e = shap_forest(forest, x, mode)?;
            Ok((0..p)
                .map(|a| (0..e.n_classes).map(|k| e.phi(k, a).abs()).sum())
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut significance = vec![0.0; p];
    for row in &per_row {
        for (s, v) in significance.iter_mut().zip(row) {
            *s += v;
        }
    }
    let used = {
        let mut u = vec![false; p];
        for t in &forest.trees {
            for f in t.split_features() {
                u[f] = true;
            }
        }
        u
    };
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        significance[b]
            .total_cmp(&significance[a])
            .then(used[b].cmp(&used[a]))
            .then(a.cmp(&b))
    });
    let informative = order.iter().filter(|&&a| significance[a] > 0.0).count();
    let n_candidates = informative.clamp(2, 4);
    let candidates = &order[..n_candidates];
    let flips = |a: usize| -> usize {
        lattice_axis(center[a], spec.epsilon, spec.resolution)
            .into_iter()
            .filter(|&v| {
                let mut q = center.to_vec();
                q[a] = v;
                forest.label_unchecked(&q) != label
            })
            .count()
    };
    let mut scored: Vec<(usize, usize, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(rank, &a)| (flips(a), rank, a))
        .collect();
    scored.sort_unstable();
    let (a, b) = (scored[0].2, scored[1].2);
    Ok((a.min(b), a.max(b)))
}

/// Provenance written into the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapMeta {
    pub dataset: String,
    pub method: String,
    /// Sample id of the center, or "averaged".
    pub center: String,
}

const CSV_HEADER: &str = "dataset,method,center,axis_x,axis_y,epsilon,kind,rows,cols";

impl HeatmapGrid {
    /// A metadata header line, its values line, then one line per lattice row.
    pub fn to_csv(&self, meta: &HeatmapMeta) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            meta.dataset,
            meta.method,
            meta.center,
            self.axis_x,
            self.axis_y,
            self.epsilon,
            self.kind,
            self.rows,
            self.cols
        );
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<(HeatmapGrid, HeatmapMeta)> {
        let bad = |m: &str| Error::InvalidHeatmap(format!("heatmap csv: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(bad("missing header"));
        }
        let meta: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing metadata"))?
            .split(',')
            .collect();
        if meta.len() != 9 {
            return Err(bad("metadata needs 9 fields"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let (rows, cols) = (num(meta[7])?, num(meta[8])?);
        let mut values = Vec::with_capacity(rows * cols);
        for line in lines {
            for v in line.split(',') {
                values.push(v.parse::<f64>().map_err(|_| bad("bad value"))?);
            }
        }
        if values.len() != rows * cols {
            return Err(bad("value count does not match rows x cols"));
        }
        let grid = HeatmapGrid {
            kind: meta[6].parse().map_err(|e: String| bad(&e))?,
            axis_x: num(meta[3])?,
            axis_y: num(meta[4])?,
            rows,
            cols,
            epsilon: meta[5].parse().map_err(|_| bad("bad epsilon"))?,
            values,
            center: None,
        };
        let meta = HeatmapMeta {
            dataset: meta[0].into(),
            method: meta[1].into(),
            center: meta[2].into(),
        };
        Ok((grid, meta))
    }

    /// Linear color scale from dark blue (min) to yellow (max); row 0 at
    /// the bottom.
    pub fn to_svg(&self, title: &str) -> String {
        const CELL: usize = 4;
        const LEGEND: usize = 60;
        let (lo, hi) = self.min_max();
        let span = if hi > lo { hi - lo } else { 1.0 };
        let color = |v: f64| -> String {
            let t = ((v - lo) / span).clamp(0.0, 1.0);
            let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
            format!(
                "#{:02x}{:02x}{:02x}",
                lerp(68.0, 253.0),
                lerp(1.0, 231.0),
                lerp(84.0, 37.0)
            )
        };
        let (w, h) = (self.cols * CELL, self.rows * CELL);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            w + LEGEND + 20,
            h + 40,
            w + LEGEND + 20,
            h + 40
        );
        let _ = writeln!(
            s,
            r#"<text x="0" y="14" font-family="sans-serif" font-size="12">{}</text>"#,
            escape(title)
        );
        let _ = writeln!(
            s,
            r#"<g transform="translate(0,20)" shape-rendering="crispEdges">"#
        );
        for r in 0..self.rows {
            for c in 0..self.cols {
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                    c * CELL,
                    (self.rows - 1 - r) * CELL,
                    color(self.get(r, c))
                );
            }
        }
        s.push_str("</g>\n");
        let lx = w + 10;
        let _ = writeln!(
            s,
            r#"<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
            color(lo),
            color(hi)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="20" width="14" height="{h}" fill="url(#scale)"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="28" font-family="sans-serif" font-size="10">max {hi:.4}</text>"#,
            lx + 16
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">min {lo:.4}</text>"#,
            lx + 16,
            h + 20
        );
        let _ = writeln!(
            s,
            r#"<text x="0" y="{}" font-family="sans-serif" font-size="10">x: feature {}, y: feature {}, ±{}</text>"#,
            h + 34,
            self.axis_x,
            self.axis_y,
            self.epsilon
        );
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::EnsembleShap;
    use crate::forest::Vote;
    use crate::tree::{Node, TreeModel};

    fn stump(
        feature: usize,
        threshold: f64,
        left: Vec<usize>,
        right: Vec<usize>,
        p: usize,
    ) -> TreeModel {
        let (lc, rc) = (left.iter().sum::<usize>(), right.iter().sum::<usize>());
        let n_classes = left.len();
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
            n_classes,
        }
    }

    #[test]
    fn embedding() {
        assert_eq!(
            embed_point(&[0.5, 0.5, 0.5], (0.49, 0.51), 0, 2).unwrap(),
            vec![0.49, 0.5, 0.51]
        );
        assert_eq!(
            embed_point(&[0.1, 0.2], (0.3, 0.4), 0, 1).unwrap(),
            vec![0.3, 0.4]
        );
        assert!(embed_point(&[0.1, 0.2], (0.3, 0.4), 1, 1).is_err());
        assert!(embed_point(&[0.1, 0.2], (0.3, 0.4), 0, 2).is_err());
        let x = [0.3, 0.1, 0.7];
        assert_eq!(embed_point(&x, (x[2], x[1]), 2, 1).unwrap(), x.to_vec());
    }

    #[test]
    fn lattice_is_even_and_inclusive() {
        let spec = HeatmapSpec::default();
        let o = spec.offsets();
        assert_eq!(o.len(), 100);
        assert_eq!((o[0], o[99]), (-0.01, 0.01));
        for w in o.windows(2) {
            assert!((w[1] - w[0] - 0.02 / 99.0).abs() < 1e-15);
        }
        assert!(!o.contains(&0.0));
        assert!(HeatmapSpec {
            resolution: 99,
            ..spec
        }
        .validate()
        .is_err());
    }

    #[test]
    fn single_leaf_gives_zero_maps() {
        let t = TreeModel::single_leaf(vec![2, 5], 3);
        let g = EnsembleShap::tree(&t, OutputMode::Probability);
        let spec = HeatmapSpec {
            resolution: 20,
            ..HeatmapSpec::default()
        };
        let d = difference_map(&g, &[0.2, 0.4, 0.6], (0, 2), &spec).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        let r = ratio_map(&g, &[0.2, 0.4, 0.6], (0, 2), &spec).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ratio_is_difference_over_distance() {
        let t = stump(1, 0.503, vec![8, 2], vec![3, 7], 2);
        let g = EnsembleShap::tree(&t, OutputMode::Probability);
        let spec = HeatmapSpec::default();
        let c = [0.5, 0.5];
        let d = difference_map(&g, &c, (0, 1), &spec).unwrap();
        let r = ratio_map(&g, &c, (0, 1), &spec).unwrap();
        let dist = distance_field(&c, (0, 1), &spec).unwrap();
        for i in 0..d.values.len() {
            assert!((r.values[i] - d.values[i] / dist[i]).abs() < 1e-12);
            assert!(r.values[i].is_finite() && r.values[i] >= 0.0);
        }
        // rows past the threshold jump, rows before it are flat
        assert!(d.get(99, 0) > 0.0 && d.get(0, 0) == 0.0);
        // along the boundary the ratio grows toward the center
        let first = (0..100).find(|&row| d.get(row, 50) > 0.0).unwrap();
        assert!(r.get(first, 50) > r.get(first, 99));
    }

    #[test]
    fn symmetric_model_gives_symmetric_map() {
        let c = 0.5;
        let t = TreeModel {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: c - 0.0042,
                    left: 1,
                    right: 2,
                    cover: 30,
                },
                Node::Leaf {
                    class_counts: vec![9, 1],
                    cover: 10,
                },
                Node::Split {
                    feature: 0,
                    threshold: c + 0.0042,
                    left: 3,
                    right: 4,
                    cover: 20,
                },
                Node::Leaf {
                    class_counts: vec![2, 8],
                    cover: 10,
                },
                Node::Leaf {
                    class_counts: vec![9, 1],
                    cover: 10,
                },
            ],
            n_features: 2,
            n_classes: 2,
        };
        let g = EnsembleShap::tree(&t, OutputMode::Probability);
        let spec = HeatmapSpec::default();
        let r = ratio_map(&g, &[c, 0.3], (0, 1), &spec).unwrap();
        for row in 0..100 {
            for col in 0..100 {
                let (a, b) = (r.get(row, col), r.get(row, 99 - col));
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn averaged_map_is_mean_of_maps() {
        let f = ForestModel::from_trees(
            vec![
                stump(0, 0.402, vec![8, 2], vec![3, 7], 2),
                stump(1, 0.597, vec![5, 5], vec![1, 9], 2),
            ],
            Vote::Soft,
        )
        .unwrap();
        let g = EnsembleShap::forest(&f, OutputMode::Probability);
        let spec = HeatmapSpec {
            resolution: 40,
            ..HeatmapSpec::default()
        };
        let test = vec![vec![0.4, 0.6], vec![0.405, 0.59], vec![0.1, 0.1]];
        let avg = averaged_ratio_map(&g, &test, (0, 1), &spec).unwrap();
        let maps: Vec<HeatmapGrid> = test
            .iter()
            .map(|x| ratio_map(&g, x, (0, 1), &spec).unwrap())
            .collect();
        for i in 0..avg.values.len() {
            let m = maps.iter().map(|g| g.values[i]).sum::<f64>() / 3.0;
            assert!((avg.values[i] - m).abs() < 1e-12);
        }
        let one = averaged_ratio_map(&g, &test[..1], (0, 1), &spec).unwrap();
        assert_eq!(one.values, maps[0].values);
    }

    #[test]
    fn axis_selection() {
        // p = 2 is fixed
        let f2 =
            ForestModel::from_trees(vec![stump(1, 0.5, vec![8, 2], vec![3, 7], 2)], Vote::Soft)
                .unwrap();
        let spec = HeatmapSpec::default();
        assert_eq!(
            select_axes(
                &f2,
                &[0.2, 0.2],
                &[vec![0.2, 0.2]],
                &spec,
                OutputMode::Probability
            )
            .unwrap(),
            (0, 1)
        );

        // feature 2 flips the label inside the band, feature 3 is a dummy
        let c = [0.5, 0.5, 0.5, 0.5];
        let f = ForestModel::from_trees(
            vec![
                stump(0, 0.3, vec![9, 1], vec![6, 4], 4),
                stump(1, 0.7, vec![6, 4], vec![9, 1], 4),
                stump(2, 0.503, vec![10, 0], vec![0, 10], 4),
            ],
            Vote::Soft,
        )
        .unwrap();
        let reference = vec![
            vec![0.2, 0.8, 0.1, 0.5],
            vec![0.9, 0.1, 0.9, 0.5],
            c.to_vec(),
        ];
        assert_eq!(
            select_axes(&f, &c, &reference, &spec, OutputMode::Probability).unwrap(),
            (0, 1)
        );
    }

    #[test]
    fn csv_round_trip_and_svg() {
        let t = stump(0, 0.5, vec![8, 2], vec![3, 7], 2);
        let g = EnsembleShap::tree(&t, OutputMode::Probability);
        let spec = HeatmapSpec {
            resolution: 6,
            ..HeatmapSpec::default()
        };
        let m = ratio_map(&g, &[0.5, 0.5], (0, 1), &spec).unwrap();
        let meta = HeatmapMeta {
            dataset: "toy".into(),
            method: "dt".into(),
            center: "3".into(),
        };
        let (back, meta_back) = HeatmapGrid::from_csv(&m.to_csv(&meta)).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(back.values, m.values);
        assert_eq!(
            (back.axis_x, back.axis_y, back.kind),
            (0, 1, HeatmapKind::Ratio)
        );
        let svg = m.to_svg("toy");
        assert_eq!(svg.matches("<rect").count(), 36 + 1);
        assert!(svg.contains("max ") && svg.contains("min "));
    }
}
