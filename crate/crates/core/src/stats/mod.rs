//! Hypothesis tests used to validate and compare synergy measurements.
//!
//! Every test returns a [`TestResult`] whose p-value lies in `[0, 1]`. Distribution
//! tails come from `statrs`; the test statistics themselves are computed here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use thiserror::Error;

mod nonparametric;
mod omnibus;
mod parametric;
mod permutation;
mod report;
mod shapiro;

pub use nonparametric::{kruskal_wallis, mann_whitney_u, mann_whitney_u_exact_counts, MwuMode};
pub use omnibus::{
    holm_adjust, run_omnibus, LevelCheck, LevelDescriptive, OmnibusOptions, OmnibusOutcome,
    OmnibusPlan, OmnibusTest, PostHocEntry, PostHocFamily,
};
pub use parametric::{anova_fisher, levene_brown_forsythe, welch_t};
pub use permutation::{
    permutation_test_paired, permutation_test_paired_with_null, NullHistogram, PermutationNull,
    DEFAULT_ITERATIONS,
};
pub use report::{format_df, ReportEntry};
pub use shapiro::shapiro_wilk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("iterations must be at least 1")]
    BadIterations,
    #[error("sample of {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },
    #[error("sample of {n} is too large (at most {max})")]
    SampleTooLarge { n: usize, max: usize },
    #[error("all values are equal")]
    ZeroVariance,
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {index} has {n} observations (need at least {min})")]
    GroupTooSmall { index: usize, n: usize, min: usize },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("not enough observations: {0}")]
    InsufficientData(String),
    #[error("within-group sum of squares is zero")]
    ZeroWithinVariance,
    #[error("both samples have zero variance")]
    BothZeroVariance,
    #[error("exact distribution unavailable: {0}")]
    ExactUnavailable(String),
}

/// Closed set of method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PermutationPaired,
    ShapiroWilk,
    LeveneBrownForsythe,
    FisherAnova,
    WelchT,
    KruskalWallis,
    MannWhitneyExact,
    MannWhitneyNormal,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::PermutationPaired => "permutation_paired",
            Method::ShapiroWilk => "shapiro_wilk",
            Method::LeveneBrownForsythe => "levene_brown_forsythe",
            Method::FisherAnova => "fisher_anova",
            Method::WelchT => "welch_t",
            Method::KruskalWallis => "kruskal_wallis",
            Method::MannWhitneyExact => "mann_whitney_exact",
            Method::MannWhitneyNormal => "mann_whitney_normal",
        }
    }
}

/// Degrees of freedom: a single value or a numerator/denominator pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub df: Option<Df>,
    pub p_value: f64,
    pub n: Vec<usize>,
    pub extras: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl TestResult {
    fn new(method: Method, statistic: f64, df: Option<Df>, p_value: f64, n: Vec<usize>) -> Self {
        TestResult {
            method,
            statistic,
            df,
            p_value: clamp_p(p_value),
            n,
            extras: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn with_extra(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.extras.insert(key.to_string(), value.into());
        self
    }

    fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 denominator.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Midranks (1-based) of `xs` and the tie-group sizes.
pub(crate) fn midranks(xs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").sf(z)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

pub(crate) fn chi2_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

pub(crate) fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    FisherSnedecor::new(d1, d2).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

pub(crate) fn t_two_sided(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|d| 2.0 * d.sf(t.abs()))
        .unwrap_or(f64::NAN)
}
