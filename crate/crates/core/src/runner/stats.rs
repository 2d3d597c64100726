//! Paired significance tests over per-item score differences.
//!
//! Both a paired t-test and the Wilcoxon signed-rank test are provided;
//! published evaluations rarely say which they used, so callers can run
//! either reading. The all-zero difference vector (identical
//! configurations) returns p = 1.0 by rule rather than erroring.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Largest sample for which the Wilcoxon null distribution is enumerated
/// exactly (via subset-sum counting); larger samples use the normal
/// approximation with tie and continuity corrections.
pub const WILCOXON_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignificanceTest {
    PairedT,
    Wilcoxon,
}

impl SignificanceTest {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PairedT => "paired-t",
            Self::Wilcoxon => "wilcoxon",
        }
    }
}

impl fmt::Display for SignificanceTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SignificanceTest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "t" | "paired-t" | "paired_t" => Ok(Self::PairedT),
            "wilcoxon" => Ok(Self::Wilcoxon),
            other => Err(format!("unknown test {other:?} (expected t or wilcoxon)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub comparison: String,
    pub test: SignificanceTest,
    pub metric: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite difference at index {0}")]
    NonFinite(usize),
}

fn check_finite(diffs: &[f64]) -> Result<(), StatsError> {
    match diffs.iter().position(|d| !d.is_finite()) {
        Some(index) => Err(StatsError::NonFinite(index)),
        None => Ok(()),
    }
}

/// Two-sided paired t-test on a difference vector. Returns (t, p).
///
/// Degenerate inputs follow fixed rules: all-zero differences give
/// (0, 1); a constant non-zero difference vector has no within-sample
/// variance, so the statistic diverges and p is 0.
pub fn paired_t(diffs: &[f64]) -> Result<(f64, f64), StatsError> {
    check_finite(diffs)?;
    if diffs.is_empty() {
        return Err(StatsError::InsufficientData("empty difference vector".into()));
    }
    if diffs.iter().all(|d| *d == 0.0) {
        return Ok((0.0, 1.0));
    }
    let n = diffs.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((f64::INFINITY.copysign(mean), 0.0));
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("degrees of freedom are positive");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok((t, p))
}

/// Two-sided Wilcoxon signed-rank test. Returns (W+, p).
///
/// Zero differences are dropped (standard practice); ties in |d| receive
/// average ranks. For n ≤ [`WILCOXON_EXACT_LIMIT`] the p-value is exact:
/// p = min(1, 2·min(P(W⁺ ≤ w), P(W⁺ ≥ w))) under the sign-flip null.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<(f64, f64), StatsError> {
    check_finite(diffs)?;
    if diffs.is_empty() {
        return Err(StatsError::InsufficientData("empty difference vector".into()));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Ok((0.0, 1.0));
    }
    let doubled = doubled_average_ranks(&nonzero);
    let w2_plus: u64 = doubled
        .iter()
        .zip(&nonzero)
        .filter(|(_, d)| **d > 0.0)
        .map(|(rank2, _)| *rank2)
        .sum();
    let w_plus = w2_plus as f64 / 2.0;
    let n = nonzero.len();
    let p = if n <= WILCOXON_EXACT_LIMIT {
        exact_two_sided_p(&doubled, w2_plus, n)
    } else {
        approximate_two_sided_p(&nonzero, w_plus)
    };
    Ok((w_plus, p))
}

/// Average ranks of |d|, doubled so ties (…x.5 averages) stay integral.
fn doubled_average_ranks(diffs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().partial_cmp(&diffs[b].abs()).unwrap());
    let mut doubled = vec![0u64; diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // 1-based sorted positions start+1 ..= end share rank (lo+hi)/2
        let rank2 = (start + 1 + end) as u64;
        for &index in &order[start..end] {
            doubled[index] = rank2;
        }
        start = end;
    }
    doubled
}

/// Exact null distribution of the doubled statistic by subset-sum
/// counting over the doubled ranks: counts[s] = number of sign
/// assignments whose positive part sums to s.
fn exact_two_sided_p(doubled: &[u64], w2_plus: u64, n: usize) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &rank2 in doubled {
        for s in (rank2 as usize..counts.len()).rev() {
            counts[s] += counts[s - rank2 as usize];
        }
    }
    let at_most: u64 = counts[..=w2_plus as usize].iter().sum();
    let at_least: u64 = counts[w2_plus as usize..].iter().sum();
    let denom = (1u64 << n) as f64;
    (2.0 * (at_most.min(at_least) as f64) / denom).min(1.0)
}

fn approximate_two_sided_p(nonzero: &[f64], w_plus: f64) -> f64 {
    let n = nonzero.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // tie correction: sum of (t^3 - t) over groups of tied |d|
    let doubled = doubled_average_ranks(nonzero);
    let mut tie_sum = 0.0;
    let mut sorted = doubled.clone();
    sorted.sort_unstable();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        tie_sum += t.powi(3) - t;
        start = end;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_sum / 48.0;
    let deviation = w_plus - mean;
    if deviation.abs() <= 0.5 {
        return 1.0;
    }
    let z = (deviation.abs() - 0.5) / var.sqrt(); // continuity correction
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
}
