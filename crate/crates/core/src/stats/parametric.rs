use super::{f_sf, mean, median, t_two_sided, variance, Df, Method, StatsError, TestResult};

fn group_sizes(groups: &[Vec<f64>]) -> Vec<usize> {
    groups.iter().map(Vec::len).collect()
}

/// Between- and within-group sums of squares.
fn sums_of_squares(groups: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let mut between = 0.0;
    let mut within = 0.0;
    for g in groups {
        let m = mean(g);
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    (between, within)
}

/// Brown-Forsythe variant of Levene's test: one-way F on absolute deviations from
/// each group's median.
pub fn levene_brown_forsythe(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    for (index, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall {
                index,
                n: g.len(),
                min: 2,
            });
        }
    }
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let med = median(g);
            g.iter().map(|x| (x - med).abs()).collect()
        })
        .collect();
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let (d1, d2) = ((k - 1) as f64, (n_total - k) as f64);
    let (between, within) = sums_of_squares(&deviations);
    let n = group_sizes(groups);
    if within == 0.0 {
        return Ok(if between == 0.0 {
            TestResult::new(Method::LeveneBrownForsythe, 0.0, Some(Df::Two(d1, d2)), 1.0, n)
                .with_warning("all absolute deviations are equal; spread is identical")
        } else {
            TestResult::new(
                Method::LeveneBrownForsythe,
                f64::INFINITY,
                Some(Df::Two(d1, d2)),
                0.0,
                n,
            )
            .with_warning("zero within-group spread of deviations; F is unbounded")
        });
    }
    let f = (between / d1) / (within / d2);
    Ok(TestResult::new(
        Method::LeveneBrownForsythe,
        f,
        Some(Df::Two(d1, d2)),
        f_sf(f, d1, d2),
        n,
    ))
}

/// One-way Fisher ANOVA, `F = MSB / MSW` on `(k - 1, N - k)` degrees of freedom.
pub fn anova_fisher(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(i));
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    if n_total <= k {
        return Err(StatsError::InsufficientData(format!(
            "{n_total} observations for {k} groups"
        )));
    }
    let (between, within) = sums_of_squares(groups);
    if within == 0.0 {
        return Err(StatsError::ZeroWithinVariance);
    }
    let (d1, d2) = ((k - 1) as f64, (n_total - k) as f64);
    let f = (between / d1) / (within / d2);
    Ok(TestResult::new(
        Method::FisherAnova,
        f,
        Some(Df::Two(d1, d2)),
        f_sf(f, d1, d2),
        group_sizes(groups),
    )
    .with_extra("ss_between", between)
    .with_extra("ss_within", within))
}

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::SampleTooSmall { n: s.len(), min: 2 });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::BothZeroVariance);
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult::new(
        Method::WelchT,
        t,
        Some(Df::One(df)),
        t_two_sided(t, df),
        vec![a.len(), b.len()],
    ))
}
