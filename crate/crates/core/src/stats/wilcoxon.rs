//! Wilcoxon signed-rank test for paired samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.01;
/// Largest effective sample size tested with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// Two labelled vectors of paired observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSamples {
    pub label_a: String,
    pub label_b: String,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSamples {
    pub fn new(
        label_a: impl Into<String>,
        label_b: impl Into<String>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "paired samples differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::invalid("paired samples are empty"));
        }
        if let Some(i) = a.iter().chain(&b).position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at position {}",
                i % a.len()
            )));
        }
        Ok(PairedSamples {
            label_a: label_a.into(),
            label_b: label_b.into(),
            a,
            b,
        })
    }

    /// Samples whose differences `a - b` are exactly `d`.
    pub fn from_differences(d: &[f64]) -> Result<Self> {
        PairedSamples::new("a", "b", d.to_vec(), vec![0.0; d.len()])
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    Less,
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            _ => Err(Error::invalid(format!(
                "unknown alternative {s:?} (two-sided, greater, less)"
            ))),
        }
    }
}

/// Treatment of zero differences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroMethod {
    /// Drop zeros before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then leave them out of both sums.
    Pratt,
}

impl FromStr for ZeroMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wilcox" => Ok(ZeroMethod::Wilcox),
            "pratt" => Ok(ZeroMethod::Pratt),
            _ => Err(Error::invalid(format!("unknown zero method {s:?} (wilcox, pratt)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOptions {
    pub alpha: f64,
    pub alternative: Alternative,
    pub zero_method: ZeroMethod,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions {
            alpha: DEFAULT_ALPHA,
            alternative: Alternative::TwoSided,
            zero_method: ZeroMethod::Wilcox,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::NormalApprox => "normal-approx",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: Method,
    /// Pairs with a nonzero difference.
    pub n_effective: usize,
    pub alpha: f64,
    pub alternative: Alternative,
    /// `p_value < alpha`.
    pub significant: bool,
    /// Every difference was zero.
    pub no_difference: bool,
}

/// Mid-ranks of `values` (all non-negative), doubled so ties stay integral.
pub(crate) fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end+1, doubled mean = first + last
        let doubled = (start + 1 + end + 1) as u64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Number of sign assignments giving each doubled `W+` value.
fn null_counts(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub fn wilcoxon_signed_rank(s: &PairedSamples, opts: &WilcoxonOptions) -> Result<WilcoxonResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {} outside (0, 1)", opts.alpha)));
    }
    let diffs = s.differences();
    let ranked: Vec<f64> = match opts.zero_method {
        ZeroMethod::Wilcox => diffs.iter().copied().filter(|&d| d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.clone(),
    };
    let ranks = doubled_midranks(&ranked.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let mut nonzero = Vec::new();
    let (mut plus2, mut minus2) = (0u64, 0u64);
    for (&d, &r) in ranked.iter().zip(&ranks) {
        if d > 0.0 {
            plus2 += r;
            nonzero.push(r);
        } else if d < 0.0 {
            minus2 += r;
            nonzero.push(r);
        }
    }
    let n = nonzero.len();
    let (w_plus, w_minus) = (plus2 as f64 / 2.0, minus2 as f64 / 2.0);
    let mut result = WilcoxonResult {
        w_statistic: w_plus.min(w_minus),
        w_plus,
        w_minus,
        p_value: 1.0,
        method: Method::Exact,
        n_effective: n,
        alpha: opts.alpha,
        alternative: opts.alternative,
        significant: false,
        no_difference: n == 0,
    };
    if n == 0 {
        return Ok(result);
    }

    let (lower, upper) = if n <= EXACT_MAX_N {
        let counts = null_counts(&nonzero);
        let total = 2f64.powi(n as i32);
        let lower: f64 = counts[..=plus2 as usize].iter().sum::<f64>() / total;
        let upper: f64 = counts[plus2 as usize..].iter().sum::<f64>() / total;
        (lower, upper)
    } else {
        result.method = Method::NormalApprox;
        let sum: f64 = nonzero.iter().map(|&r| r as f64 / 2.0).sum();
        let sum_sq: f64 = nonzero.iter().map(|&r| (r as f64 / 2.0).powi(2)).sum();
        let mean = sum / 2.0;
        let sd = (sum_sq / 4.0).sqrt();
        let normal = Normal::standard();
        let lower = normal.cdf((w_plus - mean + 0.5) / sd);
        let upper = normal.sf((w_plus - mean - 0.5) / sd);
        (lower, upper)
    };
    let p = match opts.alternative {
        Alternative::TwoSided => 2.0 * lower.min(upper),
        Alternative::Greater => upper,
        Alternative::Less => lower,
    };
    result.p_value = p.min(1.0);
    result.significant = result.p_value < opts.alpha;
    Ok(result)
}
