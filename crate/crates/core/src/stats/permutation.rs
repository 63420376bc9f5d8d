use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, StatsError, TestResult};

pub const DEFAULT_ITERATIONS: usize = 10_000;

/// Relative slack when comparing permuted statistics to the observed one, so that
/// sign patterns reproducing `|observed|` up to rounding are counted.
const TIE_TOLERANCE: f64 = 1e-12;

/// Mean of `diffs` with signs flipped by the bits of the iteration's own stream.
fn flipped_mean(diffs: &[f64], seed: u64, iteration: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let mut sum = 0.0;
    for chunk in diffs.chunks(64) {
        let bits: u64 = rng.random();
        for (k, d) in chunk.iter().enumerate() {
            sum += if bits >> k & 1 == 1 { -d } else { *d };
        }
    }
    sum / diffs.len() as f64
}

/// The sampled null distribution of a paired permutation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationNull {
    pub observed: f64,
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullHistogram {
    pub observed: f64,
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl PermutationNull {
    /// Equal-width histogram spanning the null draws and the observed value.
    pub fn histogram(&self, bins: usize) -> NullHistogram {
        let bins = bins.max(1);
        let lo = self
            .statistics
            .iter()
            .copied()
            .fold(self.observed, f64::min);
        let hi = self
            .statistics
            .iter()
            .copied()
            .fold(self.observed, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &s in &self.statistics {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        NullHistogram {
            observed: self.observed,
            edges,
            counts,
        }
    }
}

/// Paired sign-flip permutation test on `mean(a - b)`.
///
/// Each iteration draws its signs from a generator keyed by `(seed, iteration)`,
/// so the result does not depend on how iterations are spread across threads.
/// The two-sided p-value is `(#{|T*| >= |T|} + 1) / (iterations + 1)`.
pub fn permutation_test_paired(
    a: &[f64],
    b: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<TestResult, StatsError> {
    permutation_test_paired_with_null(a, b, iterations, seed).map(|(r, _)| r)
}

pub fn permutation_test_paired_with_null(
    a: &[f64],
    b: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<(TestResult, PermutationNull), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewPairs(a.len()));
    }
    if iterations == 0 {
        return Err(StatsError::BadIterations);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let threshold = observed.abs() * (1.0 - TIE_TOLERANCE);

    let statistics: Vec<f64> = (0..iterations as u64)
        .into_par_iter()
        .map(|i| flipped_mean(&diffs, seed, i))
        .collect();
    let extreme = statistics.iter().filter(|t| t.abs() >= threshold).count();
    let p = (extreme as f64 + 1.0) / (iterations as f64 + 1.0);

    let result = TestResult::new(Method::PermutationPaired, observed, None, p, vec![a.len()])
        .with_extra("iterations", iterations)
        .with_extra("seed", seed)
        .with_extra("extreme_count", extreme);
    Ok((
        result,
        PermutationNull {
            observed,
            statistics,
        },
    ))
}
