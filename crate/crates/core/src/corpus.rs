//! Utterance and group-profile ingestion, corpus validation, and aggregation of
//! coded utterances into the group x week metric panel.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{Code, TASK_CODES};

/// Weeks are activity phases 0..=4.
pub const MAX_WEEK: u8 = 4;
pub const WEEKS: std::ops::RangeInclusive<u8> = 0..=MAX_WEEK;

pub const UTTERANCE_COLUMNS: [&str; 8] = [
    "utterance_id",
    "group_id",
    "week",
    "seq",
    "speaker_id",
    "text",
    "code_human",
    "code_pred",
];

pub const GROUP_COLUMNS: [&str; 6] = [
    "group_id",
    "problem_type",
    "composition",
    "homogeneity",
    "quality",
    "n_members",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub utterance_id: String,
    pub group_id: String,
    pub week: u8,
    pub seq: u64,
    pub speaker_id: String,
    pub text: String,
    #[serde(default)]
    pub code_human: Option<Code>,
    #[serde(default)]
    pub code_pred: Option<Code>,
}

impl Utterance {
    pub fn code(&self, source: CodeSource) -> Option<Code> {
        match source {
            CodeSource::Human => self.code_human,
            CodeSource::Pred => self.code_pred,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeSource {
    Human,
    Pred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// `.jsonl` / `.ndjson` are JSON lines, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProblemType {
    SS,
    MS,
    DS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Homogeneity {
    Homo,
    Hetero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quality {
    Excellent,
    Good,
    Pass,
    Fail,
}

impl FromStr for ProblemType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "SS" => Ok(ProblemType::SS),
            "MS" => Ok(ProblemType::MS),
            "DS" => Ok(ProblemType::DS),
            _ => Err(()),
        }
    }
}

impl FromStr for Homogeneity {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim_end_matches('.') {
            "Homo" | "Homogeneous" => Ok(Homogeneity::Homo),
            "Hetero" | "Heterogeneous" => Ok(Homogeneity::Hetero),
            _ => Err(()),
        }
    }
}

impl FromStr for Quality {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Excellent" => Ok(Quality::Excellent),
            "Good" => Ok(Quality::Good),
            "Pass" => Ok(Quality::Pass),
            "Fail" | "Failed" => Ok(Quality::Fail),
            _ => Err(()),
        }
    }
}

impl ProblemType {
    pub fn label(self) -> &'static str {
        match self {
            ProblemType::SS => "SS",
            ProblemType::MS => "MS",
            ProblemType::DS => "DS",
        }
    }
}

impl Quality {
    pub fn label(self) -> &'static str {
        match self {
            Quality::Excellent => "Excellent",
            Quality::Good => "Good",
            Quality::Pass => "Pass",
            Quality::Fail => "Fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub group_id: String,
    pub problem_type: ProblemType,
    pub composition: String,
    pub homogeneity: Homogeneity,
    pub quality: Quality,
    pub n_members: u32,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: unknown code {token:?}")]
    UnknownCode { line: u64, token: String },
    #[error("duplicate utterance_id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: unknown {field} value {token:?}")]
    UnknownEnum {
        line: u64,
        field: &'static str,
        token: String,
    },
    #[error("duplicate group_id {0:?}")]
    DuplicateGroup(String),
    #[error("utterance {0:?} has no code from the selected source")]
    MissingCode(String),
    #[error("group {0:?} has no profile, member count unknown")]
    UnknownGroup(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_code_field(raw: &str, line: u64) -> Result<Option<Code>, CorpusError> {
    let token = raw.trim();
    if token.is_empty() {
        return Ok(None);
    }
    token
        .parse::<Code>()
        .map(Some)
        .map_err(|_| CorpusError::UnknownCode {
            line,
            token: token.to_string(),
        })
}

fn check_week(week: i64, line: u64) -> Result<u8, CorpusError> {
    if (0..=MAX_WEEK as i64).contains(&week) {
        Ok(week as u8)
    } else {
        Err(CorpusError::MalformedRow {
            line,
            reason: format!("week {week} outside 0..={MAX_WEEK}"),
        })
    }
}

fn csv_error(e: csv::Error) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CorpusError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), CorpusError> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(CorpusError::MalformedRow {
            line: 1,
            reason: format!("expected header {expected:?}, found {found:?}"),
        });
    }
    Ok(())
}

fn read_utterances_csv(path: &Path) -> Result<Vec<Utterance>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(csv_error)?.clone();
    check_header(&headers, &UTTERANCE_COLUMNS)?;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let week: i64 = field(2).trim().parse().map_err(|_| CorpusError::MalformedRow {
            line,
            reason: format!("week {:?} is not an integer", field(2)),
        })?;
        let seq: u64 = field(3).trim().parse().map_err(|_| CorpusError::MalformedRow {
            line,
            reason: format!("seq {:?} is not a non-negative integer", field(3)),
        })?;
        out.push(Utterance {
            utterance_id: field(0).trim().to_string(),
            group_id: field(1).trim().to_string(),
            week: check_week(week, line)?,
            seq,
            speaker_id: field(4).to_string(),
            text: field(5).to_string(),
            code_human: parse_code_field(field(6), line)?,
            code_pred: parse_code_field(field(7), line)?,
        });
        if out.last().is_some_and(|u| u.utterance_id.is_empty()) {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty utterance_id".into(),
            });
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonUtterance {
    utterance_id: String,
    group_id: String,
    week: i64,
    seq: u64,
    #[serde(default)]
    speaker_id: String,
    text: String,
    #[serde(default)]
    code_human: Option<String>,
    #[serde(default)]
    code_pred: Option<String>,
}

fn read_utterances_jsonl(path: &Path) -> Result<Vec<Utterance>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonUtterance =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?;
        let code = |c: &Option<String>| match c {
            Some(t) => parse_code_field(t, line_no),
            None => Ok(None),
        };
        out.push(Utterance {
            week: check_week(row.week, line_no)?,
            code_human: code(&row.code_human)?,
            code_pred: code(&row.code_pred)?,
            utterance_id: row.utterance_id,
            group_id: row.group_id,
            seq: row.seq,
            speaker_id: row.speaker_id,
            text: row.text,
        });
    }
    Ok(out)
}

/// Reads utterances and returns them sorted by `(group_id, week, seq)`.
///
/// Rejects duplicate ids and group streams whose `seq` is not strictly increasing
/// across weeks.
pub fn parse_utterances(path: &Path, format: InputFormat) -> Result<Vec<Utterance>, CorpusError> {
    let utterances = match format {
        InputFormat::Csv => read_utterances_csv(path)?,
        InputFormat::Jsonl => read_utterances_jsonl(path)?,
    };
    normalize_utterances(utterances)
}

/// Sorting and integrity checks shared by every ingestion route.
pub fn normalize_utterances(mut utterances: Vec<Utterance>) -> Result<Vec<Utterance>, CorpusError> {
    let mut seen = HashSet::with_capacity(utterances.len());
    for u in &utterances {
        if !seen.insert(u.utterance_id.as_str()) {
            return Err(CorpusError::DuplicateId(u.utterance_id.clone()));
        }
    }
    utterances.sort_by(|a, b| {
        (a.group_id.as_str(), a.week, a.seq).cmp(&(b.group_id.as_str(), b.week, b.seq))
    });
    for pair in utterances.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.group_id == b.group_id && a.seq >= b.seq {
            return Err(CorpusError::MalformedRow {
                line: 0,
                reason: format!(
                    "group {}: seq {} of {} does not increase past {} of {}",
                    b.group_id, b.seq, b.utterance_id, a.seq, a.utterance_id
                ),
            });
        }
    }
    Ok(utterances)
}

pub fn write_utterances_csv(path: &Path, utterances: &[Utterance]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let to_io = |e: csv::Error| CorpusError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    w.write_record(UTTERANCE_COLUMNS).map_err(to_io)?;
    for u in utterances {
        let week = u.week.to_string();
        let seq = u.seq.to_string();
        w.write_record([
            u.utterance_id.as_str(),
            &u.group_id,
            &week,
            &seq,
            &u.speaker_id,
            &u.text,
            u.code_human.map(Code::token).unwrap_or(""),
            u.code_pred.map(Code::token).unwrap_or(""),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn parse_group_profiles(path: &Path) -> Result<Vec<GroupProfile>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(csv_error)?.clone();
    check_header(&headers, &GROUP_COLUMNS)?;

    let mut out: Vec<GroupProfile> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let unknown = |field_name: &'static str, token: &str| CorpusError::UnknownEnum {
            line,
            field: field_name,
            token: token.to_string(),
        };
        let n_members: u32 = field(5).parse().map_err(|_| CorpusError::MalformedRow {
            line,
            reason: format!("n_members {:?} is not an integer", field(5)),
        })?;
        if n_members == 0 {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "n_members must be at least 1".into(),
            });
        }
        let profile = GroupProfile {
            group_id: field(0).to_string(),
            problem_type: field(1)
                .parse()
                .map_err(|_| unknown("problem_type", field(1)))?,
            composition: field(2).to_string(),
            homogeneity: field(3)
                .parse()
                .map_err(|_| unknown("homogeneity", field(3)))?,
            quality: field(4).parse().map_err(|_| unknown("quality", field(4)))?,
            n_members,
        };
        if out.iter().any(|p| p.group_id == profile.group_id) {
            return Err(CorpusError::DuplicateGroup(profile.group_id));
        }
        out.push(profile);
    }
    Ok(out)
}

pub fn write_group_profiles_csv(path: &Path, profiles: &[GroupProfile]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let to_io = |e: csv::Error| CorpusError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    w.write_record(GROUP_COLUMNS).map_err(to_io)?;
    for p in profiles {
        let homogeneity = match p.homogeneity {
            Homogeneity::Homo => "Homo",
            Homogeneity::Hetero => "Hetero",
        };
        w.write_record([
            p.group_id.as_str(),
            p.problem_type.label(),
            &p.composition,
            homogeneity,
            p.quality.label(),
            &p.n_members.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCoverage {
    pub total: usize,
    pub human: usize,
    pub pred: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupWeek {
    pub group_id: String,
    pub week: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_utterances: usize,
    pub n_profiles: usize,
    /// Group ids found in utterances but missing from the profiles.
    pub orphan_groups: Vec<String>,
    /// Profiled groups without a single utterance.
    pub empty_groups: Vec<String>,
    /// Profiled group-weeks with no utterances; these drop out of the panel.
    pub absent_group_weeks: Vec<GroupWeek>,
    pub coverage: CodeCoverage,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Cross-checks utterances against profiles. Never fails; problems are reported.
pub fn validate_corpus(utterances: &[Utterance], profiles: &[GroupProfile]) -> ValidationReport {
    let profiled: BTreeSet<&str> = profiles.iter().map(|p| p.group_id.as_str()).collect();
    let mut present: BTreeMap<&str, BTreeSet<u8>> = BTreeMap::new();
    let mut coverage = CodeCoverage {
        total: utterances.len(),
        ..Default::default()
    };
    for u in utterances {
        present.entry(u.group_id.as_str()).or_default().insert(u.week);
        coverage.human += usize::from(u.code_human.is_some());
        coverage.pred += usize::from(u.code_pred.is_some());
    }

    let mut report = ValidationReport {
        n_utterances: utterances.len(),
        n_profiles: profiles.len(),
        coverage,
        ..Default::default()
    };

    for g in present.keys().filter(|g| !profiled.contains(**g)) {
        report.orphan_groups.push(g.to_string());
        report
            .warnings
            .push(format!("group {g} has utterances but no profile"));
    }
    for p in profiles {
        match present.get(p.group_id.as_str()) {
            None => {
                report.empty_groups.push(p.group_id.clone());
                report
                    .warnings
                    .push(format!("group {} has no utterances", p.group_id));
            }
            Some(weeks) => {
                let missing: Vec<u8> = WEEKS.filter(|w| !weeks.contains(w)).collect();
                if !missing.is_empty() {
                    report.notes.push(format!(
                        "group {} has no utterances in week(s) {:?}; absent from the metric panel",
                        p.group_id, missing
                    ));
                }
                report
                    .absent_group_weeks
                    .extend(missing.into_iter().map(|week| GroupWeek {
                        group_id: p.group_id.clone(),
                        week,
                    }));
            }
        }
    }
    let cov = &report.coverage;
    if cov.human < cov.total {
        report.notes.push(format!(
            "{} of {} utterances lack a human code",
            cov.total - cov.human,
            cov.total
        ));
    }
    if cov.pred < cov.total {
        report.notes.push(format!(
            "{} of {} utterances lack a predicted code",
            cov.total - cov.pred,
            cov.total
        ));
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Count divided by the group's member count.
    #[default]
    PerMember,
    RawCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOptions {
    pub code_source: CodeSource,
    pub normalization: Normalization,
    /// Emit every profiled group-week, with zeros where nothing task-relevant happened.
    pub zero_fill: bool,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            code_source: CodeSource::Human,
            normalization: Normalization::PerMember,
            zero_fill: false,
        }
    }
}

/// One group-week row of the metric panel; `values` is indexed like [`TASK_CODES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub group_id: String,
    pub week: u8,
    pub values: [f64; 9],
}

impl Observation {
    pub fn value(&self, code: Code) -> Option<f64> {
        code.task_index().map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPanel {
    pub observations: Vec<Observation>,
    pub normalization: Normalization,
}

impl MetricPanel {
    pub fn new(mut observations: Vec<Observation>, normalization: Normalization) -> Self {
        observations.sort_by(|a, b| (&a.group_id, a.week).cmp(&(&b.group_id, b.week)));
        MetricPanel {
            observations,
            normalization,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn column(&self, code: Code) -> Vec<f64> {
        let j = code.task_index().expect("task code");
        self.observations.iter().map(|o| o.values[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group_id".to_string(), "week".to_string()];
        header.extend(TASK_CODES.iter().map(|c| c.token().to_string()));
        w.write_record(&header)?;
        for o in &self.observations {
            let mut row = vec![o.group_id.clone(), o.week.to_string()];
            row.extend(o.values.iter().map(|v| format!("{v:.6}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts task-relevant codes per group-week and normalizes them.
///
/// `I`-coded utterances are excluded. Group-weeks with no task-relevant utterance
/// are omitted unless `zero_fill` is set.
pub fn aggregate_metrics(
    utterances: &[Utterance],
    profiles: &[GroupProfile],
    options: AggregateOptions,
) -> Result<MetricPanel, CorpusError> {
    let members: BTreeMap<&str, u32> = profiles
        .iter()
        .map(|p| (p.group_id.as_str(), p.n_members))
        .collect();

    let mut counts: BTreeMap<(&str, u8), [u64; 9]> = BTreeMap::new();
    for u in utterances {
        let code = u
            .code(options.code_source)
            .ok_or_else(|| CorpusError::MissingCode(u.utterance_id.clone()))?;
        if let Some(j) = code.task_index() {
            counts.entry((u.group_id.as_str(), u.week)).or_insert([0; 9])[j] += 1;
        }
    }

    if options.zero_fill {
        let groups: BTreeSet<&str> = members
            .keys()
            .copied()
            .chain(utterances.iter().map(|u| u.group_id.as_str()))
            .collect();
        for g in groups {
            for w in WEEKS {
                counts.entry((g, w)).or_insert([0; 9]);
            }
        }
    }

    let mut observations = Vec::with_capacity(counts.len());
    for ((group, week), raw) in counts {
        let divisor = match options.normalization {
            Normalization::RawCount => 1.0,
            Normalization::PerMember => *members
                .get(group)
                .ok_or_else(|| CorpusError::UnknownGroup(group.to_string()))?
                as f64,
        };
        let mut values = [0.0; 9];
        for (v, &c) in values.iter_mut().zip(raw.iter()) {
            *v = c as f64 / divisor;
        }
        observations.push(Observation {
            group_id: group.to_string(),
            week,
            values,
        });
    }
    Ok(MetricPanel::new(observations, options.normalization))
}
