//! Normality screening and two-sample tests for per-sample robustness
//! values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

/// Smallest sample accepted by [`normality_check`] and [`compare`].
pub const MIN_SAMPLES: usize = 8;

/// Largest nonzero-difference count handled by the exact signed-rank
/// distribution.
pub const EXACT_SIGNED_RANK_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normality {
    pub w: f64,
    pub p_value: f64,
    pub normal: bool,
    /// Zero-range sample; reported with `w = 1`, `p = 0`, not normal.
    pub degenerate: bool,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Shapiro-Wilk W and p-value (Royston's AS R94 approximation).
pub fn shapiro_wilk(samples: &[f64]) -> Result<Normality> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if n > 5000 {
        log::warn!("Shapiro-Wilk p-values are approximate above 5000 samples (n = {n})");
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range.partial_cmp(&1e-19) != Some(std::cmp::Ordering::Greater) {
        return Ok(Normality {
            w: 1.0,
            p_value: 0.0,
            normal: false,
            degenerate: true,
        });
    }

    let an = n as f64;
    let half = n / 2;
    let norm = std_normal();
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let m: Vec<f64> = (1..=half)
            .map(|i| norm.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (2, fac)
        } else {
            (
                1,
                ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt(),
            )
        };
        a[0] = a1;
        for i in first..half {
            a[i] = -m[i] / fac;
        }
    }

    // W as the squared correlation between the ordered sample and the
    // antisymmetric coefficient vector
    let coef = |i: usize| -> f64 {
        if i < half {
            -a[i]
        } else if i >= n - half {
            a[n - 1 - i]
        } else {
            0.0
        }
    };
    let sa = (0..n).map(coef).sum::<f64>() / an;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let asa = coef(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    let p_value = if n == 3 {
        const PI6: f64 = 6.0 / std::f64::consts::PI;
        const STQR: f64 = std::f64::consts::FRAC_PI_3;
        (PI6 * (w.sqrt().asin() - STQR)).max(0.0)
    } else {
        let mut y = w1.ln();
        let lxx = an.ln();
        let (mean, sd) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], an);
            if y >= gamma {
                return Ok(Normality {
                    w,
                    p_value: 1e-99,
                    normal: false,
                    degenerate: false,
                });
            }
            y = -(gamma - y).ln();
            (
                poly(&[0.544, -0.39978, 0.025054, -6.714e-4], an),
                poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp(),
            )
        } else {
            (
                poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], lxx),
                poly(&[-0.4803, -0.082676, 0.0030302], lxx).exp(),
            )
        };
        norm.sf((y - mean) / sd)
    };
    let p_value = p_value.clamp(0.0, 1.0);
    Ok(Normality {
        w,
        p_value,
        normal: p_value >= ALPHA,
        degenerate: false,
    })
}

/// Shapiro-Wilk screen at the 0.05 level; requires at least
/// [`MIN_SAMPLES`] values.
pub fn normality_check(samples: &[f64]) -> Result<Normality> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    shapiro_wilk(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Pooled-variance two-sample t-test.
    StudentsT,
    PairedT,
    /// Signed-rank test on paired differences.
    Wilcoxon,
    /// Rank-sum test on independent samples.
    MannWhitney,
    /// Every paired difference is zero.
    Degenerate,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::StudentsT => "students_t",
            TestKind::PairedT => "paired_t",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::MannWhitney => "mann_whitney",
            TestKind::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Samples are matched by test row: paired t or signed-rank.
    #[default]
    Paired,
    /// Independent samples: pooled t or rank-sum.
    Unpaired,
}

impl FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paired" => Ok(Pairing::Paired),
            "unpaired" => Ok(Pairing::Unpaired),
            other => Err(format!(
                "unknown pairing `{other}` (expected paired or unpaired)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub comparison: String,
    pub test_used: TestKind,
    /// Sign follows `a - b`: t for t-tests, the rank sum minus its null
    /// mean for rank tests.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant_at_005: bool,
}

impl TestResult {
    fn new(test_used: TestKind, statistic: f64, p_value: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            comparison: String::new(),
            test_used,
            statistic,
            p_value,
            n,
            significant_at_005: p_value < ALPHA,
        }
    }

    pub fn labeled(mut self, comparison: impl Into<String>) -> Self {
        self.comparison = comparison.into();
        self
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let sd = variance(&d).sqrt();
    let t = if sd == 0.0 {
        if md == 0.0 {
            return Ok(TestResult::new(TestKind::Degenerate, 0.0, 1.0, n));
        }
        md.signum() * f64::INFINITY
    } else {
        md / (sd / (n as f64).sqrt())
    };
    Ok(TestResult::new(
        TestKind::PairedT,
        t,
        two_sided_t(t, n as f64 - 1.0),
        n,
    ))
}

/// Equal-variance two-sample t-test.
pub fn students_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: na.min(nb),
        });
    }
    let df = (na + nb - 2) as f64;
    let sp2 = ((na - 1) as f64 * variance(a) + (nb - 1) as f64 * variance(b)) / df;
    let diff = mean(a) - mean(b);
    let se = (sp2 * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
    let t = if se == 0.0 {
        if diff == 0.0 {
            return Ok(TestResult::new(TestKind::Degenerate, 0.0, 1.0, na + nb));
        }
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    };
    Ok(TestResult::new(
        TestKind::StudentsT,
        t,
        two_sided_t(t, df),
        na + nb,
    ))
}

/// Average ranks (1-based) and the tie-group sizes.
pub fn rank_average(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Signed-rank statistics of paired differences with zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    /// Twice the average rank of each nonzero |difference|, so ties stay integral.
    pub doubled_ranks: Vec<u64>,
    pub positive: Vec<bool>,
    pub ties: Vec<usize>,
}

impl SignedRanks {
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        let d: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x - y)
            .filter(|d| *d != 0.0)
            .collect();
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let (ranks, ties) = rank_average(&abs);
        SignedRanks {
            doubled_ranks: ranks.iter().map(|r| (2.0 * r) as u64).collect(),
            positive: d.iter().map(|v| *v > 0.0).collect(),
            ties,
        }
    }

    pub fn n(&self) -> usize {
        self.doubled_ranks.len()
    }

    /// Doubled sum of the ranks of positive differences.
    pub fn doubled_w_plus(&self) -> u64 {
        self.doubled_ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, &p)| p)
            .map(|(r, _)| r)
            .sum()
    }
}

/// Number of sign patterns giving each doubled positive-rank sum.
fn signed_rank_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact two-sided p-value from the sign-pattern distribution.
pub fn signed_rank_exact_p(ranks: &SignedRanks) -> f64 {
    let n = ranks.n();
    if n == 0 {
        return 1.0;
    }
    let counts = signed_rank_counts(&ranks.doubled_ranks);
    let w = ranks.doubled_w_plus() as usize;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    let tail = lower.min(upper);
    ((2 * tail) as f64 / 2f64.powi(n as i32)).min(1.0)
}

/// Wilcoxon signed-rank test on `a - b`. Exact for at most
/// [`EXACT_SIGNED_RANK_MAX`] nonzero differences, otherwise the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let ranks = SignedRanks::new(a, b);
    let n = ranks.n();
    if n == 0 {
        return Ok(TestResult::new(TestKind::Degenerate, 0.0, 1.0, a.len()));
    }
    let nf = n as f64;
    let mean_w = nf * (nf + 1.0) / 4.0;
    let w_plus = ranks.doubled_w_plus() as f64 / 2.0;
    let statistic = w_plus - mean_w;
    let p = if n <= EXACT_SIGNED_RANK_MAX {
        signed_rank_exact_p(&ranks)
    } else {
        let tie_term: f64 = ranks
            .ties
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / 48.0;
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
        let z = ((w_plus - mean_w).abs() - 0.5).max(0.0) / sd;
        2.0 * std_normal().sf(z)
    };
    Ok(TestResult::new(TestKind::Wilcoxon, statistic, p, a.len()))
}

/// Mann-Whitney rank-sum test, normal approximation with tie and
/// continuity corrections.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = rank_average(&pooled);
    let (naf, nbf) = (na as f64, nb as f64);
    let u_a = ranks[..na].iter().sum::<f64>() - naf * (naf + 1.0) / 2.0;
    let mean_u = naf * nbf / 2.0;
    let nt = naf + nbf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = naf * nbf / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    let statistic = u_a - mean_u;
    if var <= 0.0 {
        return Ok(TestResult::new(
            TestKind::Degenerate,
            statistic,
            1.0,
            na + nb,
        ));
    }
    let z = (statistic.abs() - 0.5).max(0.0) / var.sqrt();
    Ok(TestResult::new(
        TestKind::MannWhitney,
        statistic,
        2.0 * std_normal().sf(z),
        na + nb,
    ))
}

/// Screens both samples for normality, then runs the matching test:
/// t-tests when both look normal, rank tests otherwise.
pub fn compare(a: &[f64], b: &[f64], pairing: Pairing) -> Result<TestResult> {
    if pairing == Pairing::Paired && a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len().min(b.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    if a == b {
        return Ok(TestResult::new(TestKind::Degenerate, 0.0, 1.0, a.len()));
    }
    let normal = normality_check(a)?.normal && normality_check(b)?.normal;
    match (pairing, normal) {
        (Pairing::Paired, true) => paired_t(a, b),
        (Pairing::Paired, false) => wilcoxon_signed_rank(a, b),
        (Pairing::Unpaired, true) => students_t(a, b),
        (Pairing::Unpaired, false) => mann_whitney(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Normal as NormalDist};

    fn vec_kind(n: usize, k: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| {
                let f = i as f64;
                match k {
                    0 => (f * 1.7).sin() * 3.0 + f * 0.1,
                    1 => ((f * 0.37).cos() * 2.0).exp(),
                    _ => ((i * 7919) % 101) as f64 / 10.0,
                }
            })
            .collect()
    }

    // reference values from scipy.stats.shapiro, whose AS R94 port runs
    // partly in single precision
    #[test]
    fn shapiro_wilk_matches_reference() {
        let cases = [
            (8, 0, 0.8735173055586232, 0.16310402273032865),
            (11, 1, 0.7054623513190057, 0.0005499340605677559),
            (12, 2, 0.937379033896689, 0.46488281676854587),
            (20, 0, 0.921307218625046, 0.10499756554015593),
            (50, 1, 0.7890791782915384, 4.957395728470605e-07),
            (137, 2, 0.9552958801843989, 0.0001957962299613879),
            (30, 2, 0.950890795180681, 0.17859951984605565),
        ];
        for (n, k, w, p) in cases {
            let r = shapiro_wilk(&vec_kind(n, k)).unwrap();
            assert!((r.w - w).abs() < 2e-5, "n={n}: W {} vs {w}", r.w);
            assert!(
                (r.p_value - p).abs() < 2e-3 * p.max(1e-3),
                "n={n}: p {} vs {p}",
                r.p_value
            );
        }
    }

    #[test]
    fn normal_and_exponential_draws() {
        let mut r = ChaCha8Rng::seed_from_u64(12);
        let normal: Vec<f64> = (0..200)
            .map(|_| NormalDist::new(0.0, 1.0).unwrap().sample(&mut r))
            .collect();
        let expo: Vec<f64> = (0..200)
            .map(|_| Exp::new(1.0).unwrap().sample(&mut r))
            .collect();
        assert!(normality_check(&normal).unwrap().normal);
        assert!(!normality_check(&expo).unwrap().normal);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let r = normality_check(&[2.0; 10]).unwrap();
        assert!(r.degenerate && !r.normal);
        assert_eq!(r.w, 1.0);
        assert!(normality_check(&[1.0; 7]).is_err());
    }

    #[test]
    fn special_functions_match_reference() {
        let t7 = StudentsT::new(0.0, 1.0, 7.0).unwrap();
        assert!((t7.sf(2.5) - 0.020496109292876437).abs() < 1e-10);
        let t30 = StudentsT::new(0.0, 1.0, 30.0).unwrap();
        assert!((t30.sf(0.3) - 0.3831230526421764).abs() < 1e-10);
        let t198 = StudentsT::new(0.0, 1.0, 198.0).unwrap();
        assert!((t198.sf(6.0) - 4.62111663033193e-09).abs() < 1e-10);
        assert!((std_normal().sf(1.96) - 0.024997895148220435).abs() < 1e-10);
        assert!((std_normal().sf(4.0) - 3.167124183311986e-05).abs() < 1e-10);
    }

    #[test]
    fn signed_rank_all_positive_five() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let ranks = SignedRanks::new(&a, &b);
        let counts = signed_rank_counts(&ranks.doubled_ranks);
        let top: u64 = counts[ranks.doubled_w_plus() as usize..].iter().sum();
        assert_eq!(top as f64 / 32.0, 1.0 / 32.0);
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_value, 1.0 / 16.0);
        assert_eq!(r.statistic, 15.0 - 7.5);
    }

    #[test]
    fn paired_tests_match_reference() {
        let a = vec_kind(30, 0);
        let b = vec_kind(30, 1);
        let t = paired_t(&a, &b).unwrap();
        assert!((t.statistic - -0.4973229283597882).abs() < 1e-12);
        assert!((t.p_value - 0.6227111852545542).abs() < 1e-10);
        let s = students_t(&a, &b).unwrap();
        assert!((s.statistic - -0.5010078720968411).abs() < 1e-12);
        assert!((s.p_value - 0.6182617382629073).abs() < 1e-10);
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        // the reference reports min(W+, W-) = 222 of 465
        assert_eq!(w.statistic.abs(), 232.5 - 222.0);
        assert!((w.p_value - 0.8370382312359388).abs() < 1e-10);
        let w20 = wilcoxon_signed_rank(&a[..20], &b[..20]).unwrap();
        assert!((w20.p_value - 0.10539817810058594).abs() < 1e-15);
        let u = mann_whitney(&a, &b).unwrap();
        assert_eq!(u.statistic.abs(), 450.0 - 432.0);
        assert!((u.p_value - 0.795845542466455).abs() < 1e-10);
    }

    #[test]
    fn t_statistic_matches_closed_form() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..100).map(|_| d.sample(&mut r)).collect();
        let b: Vec<f64> = (0..100).map(|_| d.sample(&mut r) + 1.0).collect();
        let ma = a.iter().sum::<f64>() / 100.0;
        let mb = b.iter().sum::<f64>() / 100.0;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / 99.0;
        let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / 99.0;
        let t = (ma - mb) / ((va + vb) / 2.0 * (2.0 / 100.0)).sqrt();
        let res = students_t(&a, &b).unwrap();
        assert!((res.statistic - t).abs() < 1e-12);
        assert!(res.p_value < 0.001);
        let cmp = compare(&a, &b, Pairing::Unpaired).unwrap();
        assert_eq!(cmp.test_used, TestKind::StudentsT);
    }

    #[test]
    fn identical_lists_are_degenerate() {
        let a = vec_kind(12, 1);
        let r = compare(&a, &a, Pairing::Paired).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant_at_005);
    }

    #[test]
    fn compare_is_symmetric() {
        for (pairing, k) in [
            (Pairing::Paired, 1),
            (Pairing::Unpaired, 1),
            (Pairing::Paired, 0),
            (Pairing::Unpaired, 0),
        ] {
            let a = vec_kind(40, k);
            let b: Vec<f64> = vec_kind(40, 2).iter().map(|v| v * 0.3).collect();
            let ab = compare(&a, &b, pairing).unwrap();
            let ba = compare(&b, &a, pairing).unwrap();
            assert_eq!(ab.test_used, ba.test_used);
            assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            assert_eq!(ab.statistic, -ba.statistic);
        }
    }

    #[test]
    fn small_samples_are_rejected() {
        assert!(compare(&[1.0; 5], &[2.0; 5], Pairing::Paired).is_err());
        assert!(compare(&[1.0; 9], &[2.0; 8], Pairing::Paired).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        let (r, t) = rank_average(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![2]);
    }
}
