use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    anova_fisher, kruskal_wallis, levene_brown_forsythe, mann_whitney_u, mean, shapiro_wilk,
    variance, welch_t, MwuMode, StatsError, TestResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmnibusTest {
    FisherAnova,
    KruskalWallis,
}

impl OmnibusTest {
    pub fn post_hoc(self) -> PostHocFamily {
        match self {
            OmnibusTest::FisherAnova => PostHocFamily::WelchT,
            OmnibusTest::KruskalWallis => PostHocFamily::MannWhitney,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostHocFamily {
    WelchT,
    MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmnibusOptions {
    pub alpha: f64,
    /// Holm step-down adjustment of the post-hoc family.
    pub holm: bool,
    /// Skip the assumption gate and run this test.
    pub force: Option<OmnibusTest>,
}

impl Default for OmnibusOptions {
    fn default() -> Self {
        OmnibusOptions {
            alpha: 0.05,
            holm: false,
            force: None,
        }
    }
}

/// Normality check for one factor level. `result` is `None` when the level
/// cannot be tested (fewer than 3 values or no spread).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: String,
    pub n: usize,
    pub result: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmnibusPlan {
    pub outcome: String,
    pub factor: String,
    pub alpha: f64,
    pub chosen_test: OmnibusTest,
    pub normality: Vec<LevelCheck>,
    pub homogeneity: Option<TestResult>,
    pub post_hoc: PostHocFamily,
    pub forced: bool,
}

impl OmnibusPlan {
    /// True when every normality and homogeneity p-value exceeds alpha.
    pub fn assumptions_hold(&self) -> bool {
        self.normality
            .iter()
            .all(|c| c.result.as_ref().is_some_and(|r| r.p_value > self.alpha))
            && self
                .homogeneity
                .as_ref()
                .is_some_and(|r| r.p_value > self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDescriptive {
    pub level: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single observation.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostHocEntry {
    pub level_a: String,
    pub level_b: String,
    /// `mean(a) - mean(b)`
    pub mean_diff: f64,
    pub result: TestResult,
    pub p_adjusted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmnibusOutcome {
    pub plan: OmnibusPlan,
    pub omnibus: TestResult,
    pub post_hoc: Vec<PostHocEntry>,
    pub descriptives: Vec<LevelDescriptive>,
    pub warnings: Vec<String>,
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * p[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    out
}

fn check_level(level: &str, values: &[f64]) -> LevelCheck {
    let (result, note) = match shapiro_wilk(values) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(format!("normality not testable: {e}"))),
    };
    LevelCheck {
        level: level.to_string(),
        n: values.len(),
        result,
        note,
    }
}

/// Assumption-gated one-way comparison of `outcome` across the levels of `factor`.
///
/// Levels are taken in sorted order. Fisher ANOVA is chosen only when every level
/// passes Shapiro-Wilk and the groups pass Brown-Forsythe at `alpha`; otherwise
/// Kruskal-Wallis. Pairwise post-hocs run only when the omnibus p is below `alpha`.
pub fn run_omnibus(
    rows: &[(String, f64)],
    outcome: &str,
    factor: &str,
    options: &OmnibusOptions,
) -> Result<OmnibusOutcome, StatsError> {
    let mut by_level: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (level, v) in rows {
        by_level.entry(level.as_str()).or_default().push(*v);
    }
    if by_level.len() < 2 {
        return Err(StatsError::TooFewGroups(by_level.len()));
    }
    let levels: Vec<&str> = by_level.keys().copied().collect();
    let groups: Vec<Vec<f64>> = by_level.values().cloned().collect();
    let mut warnings = Vec::new();

    let descriptives = levels
        .iter()
        .zip(&groups)
        .map(|(level, g)| LevelDescriptive {
            level: level.to_string(),
            n: g.len(),
            mean: mean(g),
            sd: (g.len() > 1).then(|| variance(g).sqrt()),
        })
        .collect();

    let normality: Vec<LevelCheck> = levels
        .iter()
        .zip(&groups)
        .map(|(level, g)| check_level(level, g))
        .collect();
    let homogeneity = match levene_brown_forsythe(&groups) {
        Ok(r) => Some(r),
        Err(e) => {
            warnings.push(format!("homogeneity not testable: {e}"));
            None
        }
    };

    let mut plan = OmnibusPlan {
        outcome: outcome.to_string(),
        factor: factor.to_string(),
        alpha: options.alpha,
        chosen_test: OmnibusTest::KruskalWallis,
        normality,
        homogeneity,
        post_hoc: PostHocFamily::MannWhitney,
        forced: options.force.is_some(),
    };
    plan.chosen_test = match options.force {
        Some(t) => t,
        None if plan.assumptions_hold() => OmnibusTest::FisherAnova,
        None => OmnibusTest::KruskalWallis,
    };
    plan.post_hoc = plan.chosen_test.post_hoc();

    let omnibus = match plan.chosen_test {
        OmnibusTest::FisherAnova => anova_fisher(&groups)?,
        OmnibusTest::KruskalWallis => kruskal_wallis(&groups)?,
    };

    let mut post_hoc = Vec::new();
    if omnibus.p_value < options.alpha {
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let (a, b) = (&groups[i], &groups[j]);
                if a.len() < 2 || b.len() < 2 {
                    warnings.push(format!(
                        "post-hoc {} vs {} skipped: a level has fewer than 2 observations",
                        levels[i], levels[j]
                    ));
                    continue;
                }
                let result = match plan.post_hoc {
                    PostHocFamily::WelchT => welch_t(a, b),
                    PostHocFamily::MannWhitney => mann_whitney_u(a, b, MwuMode::Auto),
                };
                match result {
                    Ok(result) => post_hoc.push(PostHocEntry {
                        level_a: levels[i].to_string(),
                        level_b: levels[j].to_string(),
                        mean_diff: mean(a) - mean(b),
                        result,
                        p_adjusted: None,
                    }),
                    Err(e) => warnings.push(format!(
                        "post-hoc {} vs {} skipped: {e}",
                        levels[i], levels[j]
                    )),
                }
            }
        }
        if options.holm {
            let raw: Vec<f64> = post_hoc.iter().map(|e| e.result.p_value).collect();
            for (e, p) in post_hoc.iter_mut().zip(holm_adjust(&raw)) {
                e.p_adjusted = Some(p);
            }
        }
    }

    Ok(OmnibusOutcome {
        plan,
        omnibus,
        post_hoc,
        descriptives,
        warnings,
    })
}
