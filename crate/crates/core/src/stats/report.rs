use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Df, OmnibusOutcome, TestResult};

/// Rounded strings for display; the raw numbers sit beside them at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formatted {
    pub statistic: String,
    pub df: Option<String>,
    pub p: String,
}

/// One row of `stats_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub label: String,
    pub method: String,
    pub statistic: f64,
    pub df: Option<Df>,
    pub p: f64,
    pub n: Vec<usize>,
    pub extras: BTreeMap<String, serde_json::Value>,
    pub formatted: Formatted,
    pub warnings: Vec<String>,
    pub post_hoc: Vec<ReportEntry>,
}

fn fmt4(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.4}")
    }
}

fn fmt_dof(d: f64) -> String {
    if d.fract() == 0.0 && d.is_finite() {
        format!("{d:.0}")
    } else {
        fmt4(d)
    }
}

/// `"(2)"` or `"(3, 51)"`; non-integer degrees of freedom use 4 decimals.
pub fn format_df(df: &Df) -> String {
    match df {
        Df::One(d) => format!("({})", fmt_dof(*d)),
        Df::Two(a, b) => format!("({}, {})", fmt_dof(*a), fmt_dof(*b)),
    }
}

impl ReportEntry {
    pub fn from_result(label: impl Into<String>, r: &TestResult) -> Self {
        ReportEntry {
            label: label.into(),
            method: r.method.tag().to_string(),
            statistic: r.statistic,
            df: r.df,
            p: r.p_value,
            n: r.n.clone(),
            extras: r.extras.clone(),
            formatted: Formatted {
                statistic: fmt4(r.statistic),
                df: r.df.as_ref().map(format_df),
                p: fmt4(r.p_value),
            },
            warnings: r.warnings.clone(),
            post_hoc: Vec::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.extras.insert(key.to_string(), v);
        self
    }

    /// Omnibus row labelled `outcome ~ factor`, carrying the plan, level
    /// descriptives and post-hoc children.
    pub fn from_omnibus(o: &OmnibusOutcome) -> Self {
        let mut entry = ReportEntry::from_result(
            format!("{} ~ {}", o.plan.outcome, o.plan.factor),
            &o.omnibus,
        )
        .with_extra("plan", &o.plan)
        .with_extra("descriptives", &o.descriptives);
        entry.warnings.extend(o.warnings.iter().cloned());
        entry.post_hoc = o
            .post_hoc
            .iter()
            .map(|ph| {
                let mut child =
                    ReportEntry::from_result(format!("{} vs {}", ph.level_a, ph.level_b), &ph.result)
                        .with_extra("mean_diff", ph.mean_diff);
                if let Some(adj) = ph.p_adjusted {
                    child = child.with_extra("p_holm", adj);
                }
                child
            })
            .collect();
        entry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{anova_fisher, run_omnibus, OmnibusOptions};

    #[test]
    fn df_formatting() {
        assert_eq!(format_df(&Df::One(2.0)), "(2)");
        assert_eq!(format_df(&Df::Two(3.0, 51.0)), "(3, 51)");
        assert_eq!(format_df(&Df::One(4.56789)), "(4.5679)");
    }

    #[test]
    fn entry_keeps_raw_and_rounded() {
        let r = anova_fisher(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]])
            .unwrap();
        let e = ReportEntry::from_result("demo", &r);
        assert_eq!(e.method, "fisher_anova");
        assert_eq!(e.formatted.statistic, "3.0000");
        assert_eq!(e.formatted.df.as_deref(), Some("(2, 6)"));
        assert_eq!(e.p, r.p_value);
        let json = serde_json::to_value(&e).unwrap();
        assert!(json["post_hoc"].as_array().unwrap().is_empty());
    }

    #[test]
    fn omnibus_entry_nests_post_hoc() {
        let rows: Vec<(String, f64)> = [("a", 1.0), ("a", 1.2), ("a", 1.1), ("a", 0.9)]
            .into_iter()
            .chain([("b", 5.0), ("b", 5.3), ("b", 5.1), ("b", 4.8)])
            .map(|(l, v)| (l.to_string(), v))
            .collect();
        let out = run_omnibus(&rows, "u_S", "quality", &OmnibusOptions::default()).unwrap();
        let e = ReportEntry::from_omnibus(&out);
        assert_eq!(e.label, "u_S ~ quality");
        assert_eq!(e.post_hoc.len(), 1);
        assert_eq!(e.post_hoc[0].label, "a vs b");
        assert!(e.extras.contains_key("descriptives"));
    }

    #[test]
    fn infinite_statistic_formats() {
        assert_eq!(fmt4(f64::INFINITY), "inf");
        assert_eq!(fmt4(0.123456), "0.1235");
    }
}
