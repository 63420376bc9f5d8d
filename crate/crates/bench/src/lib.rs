//! Input builders shared by the benchmarks.

use synergy_core::corpus::{aggregate_metrics, AggregateOptions, MetricPanel};
use synergy_core::synthetic::{demo_corpus, demo_profiles};

/// Metric panel of the demo cohort.
pub fn demo_panel(seed: u64) -> MetricPanel {
    aggregate_metrics(&demo_corpus(seed, 0.1), &demo_profiles(), AggregateOptions::default())
        .expect("demo corpus is fully coded")
}

/// Two correlated samples of length `n` from a fixed linear congruential stream.
pub fn paired_samples(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let a: Vec<f64> = (0..n).map(|_| next()).collect();
    let b = a.iter().map(|x| x + 0.1 * (next() - 0.5)).collect();
    (a, b)
}
