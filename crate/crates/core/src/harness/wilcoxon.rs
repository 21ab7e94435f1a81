//! Two-sided Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size handled by exact enumeration of sign assignments.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// p < 0.01
    Green,
    /// 0.01 <= p < 0.05
    Yellow,
    /// p >= 0.05
    Red,
}

impl Band {
    pub fn of(p: f64) -> Self {
        if p < 0.01 {
            Band::Green
        } else if p < 0.05 {
            Band::Yellow
        } else {
            Band::Red
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Green => "p<0.01",
            Band::Yellow => "p<0.05",
            Band::Red => "p>=0.05",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonTest {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Sum of ranks of positive differences `a - b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    pub band: Band,
    /// Set when the result is degenerate or below the recommended size.
    pub flag: Option<String>,
}

/// Average ranks of `|d|`, ties sharing the mean of their positions.
pub fn signed_ranks(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let mu = ranks.iter().sum::<f64>() / 2.0;
    let obs = (w_plus - mu).abs();
    let mut extreme = 0u64;
    for signs in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&k| signs >> k & 1 == 1).map(|k| ranks[k]).sum();
        if (w - mu).abs() >= obs - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mu = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}

/// Paired test of `a` against `b`. Zero differences are dropped; exact
/// enumeration is used for up to [`EXACT_MAX_N`] pairs, otherwise a normal
/// approximation with continuity and tie correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonTest> {
    if a.len() != b.len() {
        return Err(Error::shape("paired samples", a.len(), b.len()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Wilcoxon input contains a non-finite value".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonTest {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            exact: true,
            band: Band::Red,
            flag: Some("all differences are zero".into()),
        });
    }
    let ranks = signed_ranks(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum::<f64>()
        + 0.0;
    let w_minus = ranks.iter().sum::<f64>() - w_plus;
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&ranks, w_plus)
    };
    let flag = (n < 5).then(|| {
        format!(
            "only {n} nonzero pairs; p cannot fall below {}",
            2.0 / (1u64 << n) as f64
        )
    });
    Ok(WilcoxonTest {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        exact,
        band: Band::of(p_value),
        flag,
    })
}
