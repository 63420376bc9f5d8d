//! End-to-end comparisons built from the model and test primitives: human vs
//! automatic coding of the same corpus, and group factors against outcomes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::Subsystem;
use crate::corpus::{aggregate_metrics, AggregateOptions, CodeSource, CorpusError, GroupProfile, Utterance};
use crate::sdm::{run_model, SdmError, SdmOptions, SdmRun};
use crate::stats::{
    permutation_test_paired_with_null, run_omnibus, OmnibusOptions, OmnibusOutcome, PermutationNull,
    StatsError, TestResult,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sdm(#[from] SdmError),
    #[error("{outcome}: {source}")]
    Stats {
        outcome: String,
        #[source]
        source: StatsError,
    },
    #[error("no profile for group {0}")]
    UnknownGroup(String),
}

/// Per-observation quantity compared between sources or across groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "u_O")]
    OrderO,
    #[serde(rename = "u_W")]
    OrderW,
    #[serde(rename = "u_S")]
    OrderS,
    #[serde(rename = "u_C")]
    OrderC,
    #[serde(rename = "synergy")]
    Synergy,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::OrderO,
        Outcome::OrderW,
        Outcome::OrderS,
        Outcome::OrderC,
        Outcome::Synergy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Outcome::OrderO => "u_O",
            Outcome::OrderW => "u_W",
            Outcome::OrderS => "u_S",
            Outcome::OrderC => "u_C",
            Outcome::Synergy => "synergy",
        }
    }

    fn subsystem(self) -> Option<Subsystem> {
        match self {
            Outcome::OrderO => Some(Subsystem::O),
            Outcome::OrderW => Some(Subsystem::W),
            Outcome::OrderS => Some(Subsystem::S),
            Outcome::OrderC => Some(Subsystem::C),
            Outcome::Synergy => None,
        }
    }

    /// `(group_id, week) -> value` for this outcome.
    pub fn values(self, run: &SdmRun) -> BTreeMap<(String, u8), f64> {
        match self.subsystem() {
            Some(s) => run
                .orders
                .rows
                .iter()
                .map(|r| ((r.group_id.clone(), r.week), r.get(s)))
                .collect(),
            None => run
                .synergy
                .rows
                .iter()
                .map(|r| ((r.group_id.clone(), r.week), r.synergy))
                .collect(),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

/// Group attribute used as the one-way factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    ProblemType,
    Quality,
    Homogeneity,
}

impl Factor {
    pub fn label(self) -> &'static str {
        match self {
            Factor::ProblemType => "problem_type",
            Factor::Quality => "quality",
            Factor::Homogeneity => "homogeneity",
        }
    }

    pub fn level(self, p: &GroupProfile) -> String {
        match self {
            Factor::ProblemType => p.problem_type.label().to_string(),
            Factor::Quality => p.quality.label().to_string(),
            Factor::Homogeneity => format!("{:?}", p.homogeneity),
        }
    }
}

impl FromStr for Factor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "problem_type" => Ok(Factor::ProblemType),
            "quality" => Ok(Factor::Quality),
            "homogeneity" => Ok(Factor::Homogeneity),
            _ => Err(format!("unknown factor {s:?}")),
        }
    }
}

/// One permutation comparison between the two code sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceComparison {
    pub outcome: Outcome,
    pub pairs: usize,
    pub mean_reference: f64,
    pub mean_candidate: f64,
    pub result: TestResult,
    pub null: PermutationNull,
}

/// Runs the model once per code source.
pub fn model_for_source(
    utterances: &[Utterance],
    profiles: &[GroupProfile],
    aggregate: AggregateOptions,
    source: CodeSource,
    sdm: SdmOptions,
) -> Result<SdmRun, AnalysisError> {
    let panel = aggregate_metrics(
        utterances,
        profiles,
        AggregateOptions {
            code_source: source,
            ..aggregate
        },
    )?;
    Ok(run_model(&panel, sdm)?)
}

/// Paired permutation tests of each outcome, reference minus candidate, over the
/// group-weeks present in both runs.
pub fn compare_sources(
    reference: &SdmRun,
    candidate: &SdmRun,
    iterations: usize,
    seed: u64,
) -> Result<Vec<SourceComparison>, AnalysisError> {
    let mut out = Vec::new();
    for outcome in Outcome::ALL {
        let a = outcome.values(reference);
        let b = outcome.values(candidate);
        let (xs, ys): (Vec<f64>, Vec<f64>) = a
            .iter()
            .filter_map(|(k, x)| b.get(k).map(|y| (*x, *y)))
            .unzip();
        let (result, null) = permutation_test_paired_with_null(&xs, &ys, iterations, seed)
            .map_err(|source| AnalysisError::Stats {
                outcome: outcome.label().to_string(),
                source,
            })?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        out.push(SourceComparison {
            outcome,
            pairs: xs.len(),
            mean_reference: mean(&xs),
            mean_candidate: mean(&ys),
            result,
            null,
        });
    }
    Ok(out)
}

/// Omnibus comparison of each outcome across the levels of `factor`, one row per
/// group-week observation.
pub fn compare_groups(
    run: &SdmRun,
    profiles: &[GroupProfile],
    factor: Factor,
    outcomes: &[Outcome],
    options: &OmnibusOptions,
) -> Result<Vec<OmnibusOutcome>, AnalysisError> {
    let level_of: BTreeMap<&str, String> = profiles
        .iter()
        .map(|p| (p.group_id.as_str(), factor.level(p)))
        .collect();
    let mut out = Vec::new();
    for &outcome in outcomes {
        let mut rows = Vec::new();
        for ((group, _), v) in outcome.values(run) {
            let level = level_of
                .get(group.as_str())
                .ok_or_else(|| AnalysisError::UnknownGroup(group.clone()))?;
            rows.push((level.clone(), v));
        }
        out.push(
            run_omnibus(&rows, outcome.label(), factor.label(), options).map_err(|source| {
                AnalysisError::Stats {
                    outcome: outcome.label().to_string(),
                    source,
                }
            })?,
        );
    }
    Ok(out)
}
