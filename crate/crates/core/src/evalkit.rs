//! Classification quality: confusion matrices, support-weighted metrics, Cohen's
//! kappa, k-fold splits, and mean/sd summaries over repeated runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::Code;
use crate::corpus::{CodeSource, Utterance};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("k = {k} is invalid for {n} samples (need 2 <= k <= n)")]
    BadK { k: usize, n: usize },
    #[error("predictions file line {line}: {reason}")]
    MalformedPrediction { line: u64, reason: String },
    #[error("prediction for unknown utterance {0:?}")]
    UnknownUtterance(String),
    #[error("utterance {0:?} has no reference code")]
    MissingTruth(String),
    #[error("{0}")]
    Io(String),
}

/// Counts indexed `(true, predicted)` over an ordered label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix<L> {
    pub labels: Vec<L>,
    pub counts: Vec<Vec<u64>>,
}

impl<L: Ord + Clone> ConfusionMatrix<L> {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn count(&self, truth: &L, pred: &L) -> u64 {
        match (self.index(truth), self.index(pred)) {
            (Some(t), Some(p)) => self.counts[t][p],
            _ => 0,
        }
    }

    fn index(&self, label: &L) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }
}

fn check_pair<A, B>(a: &[A], b: &[B]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Tallies `(truth[i], pred[i])` pairs. Labels are the sorted union of both vectors.
pub fn confusion<L: Ord + Clone>(truth: &[L], pred: &[L]) -> Result<ConfusionMatrix<L>, EvalError> {
    check_pair(truth, pred)?;
    let labels: Vec<L> = truth
        .iter()
        .chain(pred)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut cm = ConfusionMatrix {
        counts: vec![vec![0; labels.len()]; labels.len()],
        labels,
    };
    for (t, p) in truth.iter().zip(pred) {
        let (ti, pi) = (cm.index(t).unwrap(), cm.index(p).unwrap());
        cm.counts[ti][pi] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<L: Ord> {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: BTreeMap<L, ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 plus their support-weighted averages.
///
/// Any zero denominator contributes 0.
pub fn weighted_metrics<L: Ord + Clone>(cm: &ConfusionMatrix<L>) -> Result<MetricReport<L>, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.labels.len();
    let mut per_class = BTreeMap::new();
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let tp = cm.counts[i][i];
        let support: u64 = cm.counts[i].iter().sum();
        let predicted: u64 = (0..k).map(|t| cm.counts[t][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let share = support as f64 / total as f64;
        wp += share * precision;
        wr += share * recall;
        wf += share * f1;
        per_class.insert(
            cm.labels[i].clone(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    Ok(MetricReport {
        accuracy: cm.trace() as f64 / total as f64,
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        per_class,
    })
}

/// Cohen's kappa. When chance agreement is 1, returns 1 for perfect observed
/// agreement and 0 otherwise.
pub fn cohen_kappa<L: Ord + Clone>(a: &[L], b: &[L]) -> Result<f64, EvalError> {
    let cm = confusion(a, b)?;
    let n = cm.total() as f64;
    let k = cm.labels.len();
    let p_o = cm.trace() as f64 / n;
    let p_e: f64 = (0..k)
        .map(|i| {
            let row: u64 = cm.counts[i].iter().sum();
            let col: u64 = (0..k).map(|t| cm.counts[t][i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok(((p_o - p_e) / (1.0 - p_e)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Folds {
    /// Sample indices per fold, each sorted ascending.
    pub folds: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl Folds {
    /// Fold id of every sample.
    pub fn assignment(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for (f, idx) in self.folds.iter().enumerate() {
            for &i in idx {
                out[i] = f;
            }
        }
        out
    }
}

fn deal_round_robin(order: impl IntoIterator<Item = usize>, k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Stratified k-fold split.
///
/// Each class is shuffled with the seeded generator, classes are laid end to end,
/// and positions are dealt to folds round-robin. Per-class fold counts and overall
/// fold sizes therefore differ by at most one.
pub fn stratified_kfold<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Result<Folds, EvalError> {
    let n = labels.len();
    if k < 2 || n < k {
        return Err(EvalError::BadK { k, n });
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut order = Vec::with_capacity(n);
    for (class_no, members) in by_class.values_mut().enumerate() {
        if members.len() < k {
            warnings.push(format!(
                "class #{class_no} has {} members for {k} folds; some folds will lack it",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        order.extend(members.iter().copied());
    }
    Ok(Folds {
        folds: deal_round_robin(order, k),
        warnings,
    })
}

/// Unstratified k-fold split over a seeded shuffle.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Folds, EvalError> {
    if k < 2 || n < k {
        return Err(EvalError::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Folds {
        folds: deal_round_robin(order, k),
        warnings: vec![],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample standard deviation; a single value has sd 0.
    pub fn of(xs: &[f64]) -> Option<MeanSd> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanSd { mean, sd })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub accuracy: MeanSd,
    pub weighted_f1: MeanSd,
    pub weighted_precision: MeanSd,
    pub weighted_recall: MeanSd,
}

pub fn summarize_runs<L: Ord>(reports: &[MetricReport<L>]) -> Result<RunSummary, EvalError> {
    let stat = |f: fn(&MetricReport<L>) -> f64| {
        MeanSd::of(&reports.iter().map(f).collect::<Vec<_>>()).ok_or(EvalError::EmptyInput)
    };
    Ok(RunSummary {
        runs: reports.len(),
        accuracy: stat(|r| r.accuracy)?,
        weighted_f1: stat(|r| r.weighted_f1)?,
        weighted_precision: stat(|r| r.weighted_precision)?,
        weighted_recall: stat(|r| r.weighted_recall)?,
    })
}

/// One row of a predictions file from any external classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub utterance_id: String,
    pub code_pred: Code,
    pub fold_id: Option<String>,
    pub run_id: Option<String>,
}

/// Reads `utterance_id, code_pred[, fold_id][, run_id]`.
pub fn parse_predictions(path: &Path) -> Result<Vec<PredictionRow>, EvalError> {
    let file = File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| EvalError::MalformedPrediction {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(id_col), Some(code_col)) = (col("utterance_id"), col("code_pred")) else {
        return Err(EvalError::MalformedPrediction {
            line: 1,
            reason: "header must contain utterance_id and code_pred".into(),
        });
    };
    let (fold_col, run_col) = (col("fold_id"), col("run_id"));
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EvalError::MalformedPrediction {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let opt = |c: Option<usize>| {
            c.and_then(|i| record.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
        };
        let token = record.get(code_col).unwrap_or("").trim();
        let code_pred = token.parse().map_err(|_| EvalError::MalformedPrediction {
            line,
            reason: format!("unknown code {token:?}"),
        })?;
        rows.push(PredictionRow {
            utterance_id: record.get(id_col).unwrap_or("").trim().to_string(),
            code_pred,
            fold_id: opt(fold_col),
            run_id: opt(run_col),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Grouping used for the per-split reports: `run_id`, `fold_id`, or `all`.
    pub split_by: String,
    pub splits: BTreeMap<String, MetricReport<Code>>,
    pub summary: RunSummary,
    pub pooled: MetricReport<Code>,
    pub kappa_pooled: f64,
}

/// Scores predictions against a reference code source of the corpus.
///
/// Rows are split by `run_id` when present, otherwise by `fold_id`; the summary
/// is mean and sample sd over the splits.
pub fn evaluate_predictions(
    utterances: &[Utterance],
    reference: CodeSource,
    rows: &[PredictionRow],
) -> Result<EvaluationReport, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let truth_by_id: HashMap<&str, Option<Code>> = utterances
        .iter()
        .map(|u| (u.utterance_id.as_str(), u.code(reference)))
        .collect();
    let split_by = if rows.iter().any(|r| r.run_id.is_some()) {
        "run_id"
    } else if rows.iter().any(|r| r.fold_id.is_some()) {
        "fold_id"
    } else {
        "all"
    };
    let mut pairs: BTreeMap<String, (Vec<Code>, Vec<Code>)> = BTreeMap::new();
    let mut pooled = (Vec::new(), Vec::new());
    for r in rows {
        let truth = truth_by_id
            .get(r.utterance_id.as_str())
            .ok_or_else(|| EvalError::UnknownUtterance(r.utterance_id.clone()))?
            .ok_or_else(|| EvalError::MissingTruth(r.utterance_id.clone()))?;
        let key = match split_by {
            "run_id" => r.run_id.clone().unwrap_or_default(),
            "fold_id" => r.fold_id.clone().unwrap_or_default(),
            _ => "all".to_string(),
        };
        let entry = pairs.entry(key).or_default();
        entry.0.push(truth);
        entry.1.push(r.code_pred);
        pooled.0.push(truth);
        pooled.1.push(r.code_pred);
    }
    let mut splits = BTreeMap::new();
    for (key, (t, p)) in pairs {
        splits.insert(key, weighted_metrics(&confusion(&t, &p)?)?);
    }
    let reports: Vec<_> = splits.values().cloned().collect();
    Ok(EvaluationReport {
        split_by: split_by.to_string(),
        summary: summarize_runs(&reports)?,
        splits,
        pooled: weighted_metrics(&confusion(&pooled.0, &pooled.1)?)?,
        kappa_pooled: cohen_kappa(&pooled.0, &pooled.1)?,
    })
}

/// Writes `utterance_id, fold_id` for every utterance.
pub fn write_folds_csv(path: &Path, utterances: &[Utterance], folds: &Folds) -> Result<(), EvalError> {
    let io = |e: csv::Error| EvalError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["utterance_id", "fold_id"]).map_err(io)?;
    for (u, f) in utterances.iter().zip(folds.assignment(utterances.len())) {
        w.write_record([u.utterance_id.as_str(), &f.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| EvalError::Io(e.to_string()))
}
