use serde::{Deserialize, Serialize};

use super::{chi2_sf, midranks, normal_sf, Df, Method, StatsError, TestResult};

/// Kruskal-Wallis H with the tie correction `1 - sum(t^3 - t) / (N^3 - N)`.
///
/// When every value is tied the correction is zero and H is reported as 0.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!("{n} observations")));
    }
    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0);
    let tie_sum: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let correction = 1.0 - tie_sum / (nf.powi(3) - nf);
    let df = (k - 1) as f64;
    let sizes = groups.iter().map(Vec::len).collect();
    if correction <= 0.0 {
        return Ok(
            TestResult::new(Method::KruskalWallis, 0.0, Some(Df::One(df)), 1.0, sizes)
                .with_extra("tie_correction", 0.0)
                .with_warning("all values tied; H set to 0"),
        );
    }
    let h = (h_raw / correction).max(0.0);
    Ok(
        TestResult::new(Method::KruskalWallis, h, Some(Df::One(df)), chi2_sf(h, df), sizes)
            .with_extra("tie_correction", correction),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMode {
    /// Exact when both samples have at most 8 values and there are no ties.
    #[default]
    Auto,
    Exact,
    NormalApprox,
}

const AUTO_EXACT_MAX: usize = 8;
const EXACT_MAX_TOTAL: usize = 60;

/// Number of arrangements of `m` x-values and `n` y-values giving each U in
/// `0..=m*n`, where U counts (x, y) pairs with x above y.
pub fn mann_whitney_u_exact_counts(m: usize, n: usize) -> Vec<u128> {
    // table[j][u] holds counts for (i, j) while sweeping i upward.
    let max_u = m * n;
    let mut prev: Vec<Vec<u128>> = (0..=n)
        .map(|_| {
            let mut v = vec![0u128; max_u + 1];
            v[0] = 1;
            v
        })
        .collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<u128>> = vec![vec![0u128; max_u + 1]; n + 1];
        cur[0][0] = 1;
        for j in 1..=n {
            for u in 0..=i * j {
                // Largest value is an x (beats all j y's) or a y (beats nothing).
                let from_x = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = from_x + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

/// Mann-Whitney U test, reporting `U = min(U_a, U_b)` with midranks for ties.
pub fn mann_whitney_u(a: &[f64], b: &[f64], mode: MwuMode) -> Result<TestResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptyGroup(0));
    }
    if b.is_empty() {
        return Err(StatsError::EmptyGroup(1));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let u = u_a.min(u_b);

    let exact = match mode {
        MwuMode::Auto => ties.is_empty() && na <= AUTO_EXACT_MAX && nb <= AUTO_EXACT_MAX,
        MwuMode::Exact => {
            if !ties.is_empty() {
                return Err(StatsError::ExactUnavailable("ties present".into()));
            }
            if na + nb > EXACT_MAX_TOTAL {
                return Err(StatsError::ExactUnavailable(format!(
                    "{} observations exceed {EXACT_MAX_TOTAL}",
                    na + nb
                )));
            }
            true
        }
        MwuMode::NormalApprox => false,
    };

    let result = if exact {
        let counts = mann_whitney_u_exact_counts(na, nb);
        let total: u128 = counts.iter().sum();
        // Tie-free U values are integers.
        let u_int = u.round() as usize;
        let lower: u128 = counts[..=u_int].iter().sum();
        let p = (2.0 * lower as f64 / total as f64).min(1.0);
        TestResult::new(Method::MannWhitneyExact, u, None, p, vec![na, nb])
    } else {
        let (naf, nbf) = (na as f64, nb as f64);
        let n = naf + nbf;
        let tie_sum: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
        let var = naf * nbf / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
        let mean_u = naf * nbf / 2.0;
        let (z, p) = if var <= 0.0 {
            (0.0, 1.0)
        } else {
            let z = ((u - mean_u).abs() - 0.5).max(0.0) / var.sqrt();
            (z, (2.0 * normal_sf(z)).min(1.0))
        };
        TestResult::new(Method::MannWhitneyNormal, u, None, p, vec![na, nb])
            .with_extra("z", z)
            .with_extra("tie_corrected", !ties.is_empty())
    };
    Ok(result.with_extra("u_a", u_a).with_extra("u_b", u_b))
}
