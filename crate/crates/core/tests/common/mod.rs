#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use synergy_core::corpus::{
    aggregate_metrics, parse_group_profiles, parse_utterances, AggregateOptions, InputFormat,
    MetricPanel,
};
use synergy_core::sdm::{run_model, SdmOptions, SdmRun, SignConvention, SynergyOptions};
use synergy_core::stats::shapiro_wilk;
use synergy_core::{Subsystem, TASK_CODES};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

#[derive(Debug, Deserialize)]
pub struct OracleObservation {
    pub group_id: String,
    pub week: u8,
    pub raw: Vec<f64>,
    pub per_member: Vec<f64>,
    pub u: Vec<f64>,
    pub order: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
pub struct OracleSynergy {
    pub group_id: String,
    pub week: u8,
    pub prose: f64,
    pub paper_literal: f64,
}

#[derive(Debug, Deserialize)]
pub struct Oracle {
    pub codes: Vec<String>,
    pub observations: Vec<OracleObservation>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub weights: BTreeMap<String, f64>,
    pub synergy: Vec<OracleSynergy>,
}

pub fn load_oracle() -> Oracle {
    let text = std::fs::read_to_string(data("oracle/expected.json")).expect("oracle fixture");
    serde_json::from_str(&text).expect("oracle json")
}

pub fn oracle_panel(options: AggregateOptions) -> MetricPanel {
    let us = parse_utterances(&data("oracle/utterances.csv"), InputFormat::Csv).unwrap();
    let profiles = parse_group_profiles(&data("oracle/groups.csv")).unwrap();
    aggregate_metrics(&us, &profiles, options).unwrap()
}

pub fn oracle_run(sign: SignConvention) -> SdmRun {
    let panel = oracle_panel(AggregateOptions::default());
    let options = SdmOptions {
        synergy: SynergyOptions {
            sign,
            ..SynergyOptions::default()
        },
        ..SdmOptions::default()
    };
    run_model(&panel, options).unwrap()
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

/// Compares panel, bounds, weights, order parameters and both synergy conventions
/// against the frozen oracle.
pub fn check_oracle(tol: f64) -> Result<(), String> {
    let oracle = load_oracle();
    let codes: Vec<String> = TASK_CODES.iter().map(|c| c.token().to_string()).collect();
    if oracle.codes != codes {
        return Err(format!("code order {:?}", oracle.codes));
    }
    let prose = oracle_run(SignConvention::Prose);
    let literal = oracle_run(SignConvention::PaperLiteral);
    let raw = oracle_panel(AggregateOptions {
        normalization: synergy_core::Normalization::RawCount,
        ..AggregateOptions::default()
    });
    let per_member = oracle_panel(AggregateOptions::default());

    if per_member.len() != oracle.observations.len() {
        return Err(format!(
            "{} observations, want {}",
            per_member.len(),
            oracle.observations.len()
        ));
    }
    let bounds = &prose.standardized.bounds[0].metrics;
    for j in 0..9 {
        close(&format!("alpha[{}]", codes[j]), bounds[j].alpha, oracle.alpha[j], tol)?;
        close(&format!("beta[{}]", codes[j]), bounds[j].beta, oracle.beta[j], tol)?;
    }
    for (code, w) in &oracle.weights {
        let c = code.parse().map_err(|e| format!("{e:?}"))?;
        let got = prose.weights.weight(c).ok_or(format!("no weight for {code}"))?;
        close(&format!("weight[{code}]"), got, *w, tol)?;
    }
    for ob in &oracle.observations {
        let key = |g: &str, w: u8| g == ob.group_id && w == ob.week;
        let find = |p: &MetricPanel| {
            p.observations
                .iter()
                .find(|o| key(&o.group_id, o.week))
                .cloned()
                .ok_or(format!("missing {}/{}", ob.group_id, ob.week))
        };
        let r = find(&raw)?;
        let pm = find(&per_member)?;
        let u = prose
            .standardized
            .observations
            .iter()
            .find(|o| key(&o.group_id, o.week))
            .ok_or("missing standardized row")?;
        let order = prose
            .orders
            .rows
            .iter()
            .find(|o| key(&o.group_id, o.week))
            .ok_or("missing order row")?;
        let at = |what: &str, j: usize| format!("{what}[{}/{}/{}]", ob.group_id, ob.week, codes[j]);
        for j in 0..9 {
            close(&at("raw", j), r.values[j], ob.raw[j], tol)?;
            close(&at("per_member", j), pm.values[j], ob.per_member[j], tol)?;
            close(&at("u", j), u.values[j], ob.u[j], tol)?;
        }
        for s in Subsystem::ALL {
            close(
                &format!("order[{}/{}/{}]", ob.group_id, ob.week, s.label()),
                order.get(s),
                ob.order[s.label()],
                tol,
            )?;
        }
    }
    if prose.synergy.rows.len() != oracle.synergy.len() {
        return Err(format!(
            "{} synergy rows, want {}",
            prose.synergy.rows.len(),
            oracle.synergy.len()
        ));
    }
    for want in &oracle.synergy {
        let find = |rows: &[synergy_core::sdm::SynergyRow]| {
            rows.iter()
                .find(|r| r.group_id == want.group_id && r.week == want.week)
                .map(|r| r.synergy)
                .ok_or(format!("missing synergy {}/{}", want.group_id, want.week))
        };
        let tag = format!("{}/{}", want.group_id, want.week);
        close(&format!("synergy prose {tag}"), find(&prose.synergy.rows)?, want.prose, tol)?;
        close(
            &format!("synergy paper_literal {tag}"),
            find(&literal.synergy.rows)?,
            want.paper_literal,
            tol,
        )?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
pub struct ShapiroFixture {
    pub sample: Vec<f64>,
    pub w: f64,
    pub p: f64,
}

pub fn shapiro_fixtures() -> Vec<ShapiroFixture> {
    let text = std::fs::read_to_string(data("shapiro_wilk_fixtures.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Largest |W - W_ref| and |p - p_ref| over the fixture suite.
pub fn shapiro_max_errors() -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for f in shapiro_fixtures() {
        let r = shapiro_wilk(&f.sample).unwrap();
        worst.0 = worst.0.max((r.statistic - f.w).abs());
        worst.1 = worst.1.max((r.p_value - f.p).abs());
    }
    worst
}
