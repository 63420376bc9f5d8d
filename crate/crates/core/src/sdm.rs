//! Synergy degree model: metric standardization, CRITIC weights, subsystem order
//! parameters, and week-over-week synergy degrees.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{Code, Subsystem, TASK_CODES};
use crate::corpus::{MetricPanel, Observation};

/// Bounds are widened by this fraction on each side of the observed range.
pub const BOUND_MARGIN: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum SdmError {
    #[error("metric panel is empty")]
    EmptyPanel,
    #[error("subsystem {0} needs at least two observations to weight its metrics")]
    InsufficientObservations(Subsystem),
    #[error("no weight for metric {0}")]
    MissingWeight(Code),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationScope {
    /// Bounds pooled over every group-week.
    #[default]
    Global,
    /// Bounds computed separately for each group's weeks.
    PerGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub code: Code,
    pub alpha: f64,
    pub beta: f64,
    /// `alpha == beta`; every value of the metric standardizes to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeBounds {
    /// `"global"` or a group id.
    pub scope: String,
    pub metrics: Vec<MetricBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedPanel {
    pub observations: Vec<Observation>,
    pub scope: StandardizationScope,
    pub bounds: Vec<ScopeBounds>,
    pub warnings: Vec<String>,
}

impl StandardizedPanel {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.observations.iter().map(|o| o.values[j]).collect()
    }
}

fn metric_bounds(code: Code, column: &[f64]) -> MetricBounds {
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha = max * (1.0 + BOUND_MARGIN);
    let beta = min * (1.0 - BOUND_MARGIN);
    MetricBounds {
        code,
        alpha,
        beta,
        degenerate: alpha == beta,
    }
}

/// `(e - beta) / (alpha - beta)`. A constant nonzero column sits exactly at the
/// midpoint of its symmetric bounds, so it maps to 0.5 without rounding noise.
fn standardize_value(e: f64, min: f64, max: f64, b: &MetricBounds) -> f64 {
    if b.degenerate {
        0.0
    } else if min == max {
        0.5
    } else {
        (e - b.beta) / (b.alpha - b.beta)
    }
}

fn standardize_block(
    scope_label: &str,
    rows: &mut [Observation],
    warnings: &mut Vec<String>,
) -> ScopeBounds {
    let mut metrics = Vec::with_capacity(TASK_CODES.len());
    for (j, &code) in TASK_CODES.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|o| o.values[j]).collect();
        let b = metric_bounds(code, &column);
        if b.degenerate {
            warnings.push(format!(
                "{scope_label}: metric {code} has degenerate bounds (alpha = beta = {}); standardized to 0",
                b.alpha
            ));
        }
        let min = column.iter().copied().fold(f64::INFINITY, f64::min);
        let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for o in rows.iter_mut() {
            o.values[j] = standardize_value(o.values[j], min, max, &b);
        }
        metrics.push(b);
    }
    ScopeBounds {
        scope: scope_label.to_string(),
        metrics,
    }
}

/// Maps each metric onto [0, 1] using bounds widened 5% beyond its observed range.
pub fn standardize(
    panel: &MetricPanel,
    scope: StandardizationScope,
) -> Result<StandardizedPanel, SdmError> {
    if panel.is_empty() {
        return Err(SdmError::EmptyPanel);
    }
    let mut observations = panel.observations.clone();
    observations.sort_by(|a, b| (&a.group_id, a.week).cmp(&(&b.group_id, b.week)));
    let mut warnings = Vec::new();
    let bounds = match scope {
        StandardizationScope::Global => {
            vec![standardize_block("global", &mut observations, &mut warnings)]
        }
        StandardizationScope::PerGroup => {
            let mut bounds = Vec::new();
            let mut start = 0;
            while start < observations.len() {
                let group = observations[start].group_id.clone();
                let end = start
                    + observations[start..]
                        .iter()
                        .take_while(|o| o.group_id == group)
                        .count();
                bounds.push(standardize_block(
                    &group,
                    &mut observations[start..end],
                    &mut warnings,
                ));
                start = end;
            }
            bounds
        }
    };
    Ok(StandardizedPanel {
        observations,
        scope,
        bounds,
        warnings,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Pearson correlation; a zero-variance column is treated as uncorrelated (r = 0).
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemWeights {
    pub weights: BTreeMap<Subsystem, BTreeMap<Code, f64>>,
    /// CRITIC information content per metric, before normalization.
    pub information: BTreeMap<Code, f64>,
    pub warnings: Vec<String>,
}

impl SubsystemWeights {
    pub fn weight(&self, code: Code) -> Option<f64> {
        let s = code.subsystem()?;
        self.weights.get(&s)?.get(&code).copied()
    }
}

/// CRITIC weights computed within each subsystem.
///
/// Information content of metric j is `sd_j * sum_k (1 - r_jk)` over the metrics k of
/// the same subsystem; weights are the information contents normalized to sum to 1.
pub fn critic_weights(std: &StandardizedPanel) -> Result<SubsystemWeights, SdmError> {
    let mut weights = BTreeMap::new();
    let mut information = BTreeMap::new();
    let mut warnings = Vec::new();

    for s in Subsystem::ALL {
        let codes = s.codes();
        if codes.len() == 1 {
            weights.insert(s, BTreeMap::from([(codes[0], 1.0)]));
            continue;
        }
        if std.observations.len() < 2 {
            return Err(SdmError::InsufficientObservations(s));
        }
        let columns: Vec<Vec<f64>> = codes
            .iter()
            .map(|c| std.column(c.task_index().expect("task code")))
            .collect();
        let info: Vec<f64> = columns
            .iter()
            .map(|cj| {
                let conflict: f64 = columns.iter().map(|ck| 1.0 - pearson(cj, ck)).sum();
                sample_sd(cj) * conflict
            })
            .collect();
        let total: f64 = info.iter().sum();
        let sub: BTreeMap<Code, f64> = if total > 0.0 {
            codes.iter().zip(&info).map(|(&c, &p)| (c, p / total)).collect()
        } else {
            warnings.push(format!(
                "subsystem {s}: every metric carries zero information; using uniform weights"
            ));
            let w = 1.0 / codes.len() as f64;
            codes.iter().map(|&c| (c, w)).collect()
        };
        information.extend(codes.iter().copied().zip(info));
        weights.insert(s, sub);
    }
    Ok(SubsystemWeights {
        weights,
        information,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub group_id: String,
    pub week: u8,
    /// Indexed by [`Subsystem::index`]: O, W, S, C.
    pub order: [f64; 4],
}

impl OrderRow {
    pub fn get(&self, s: Subsystem) -> f64 {
        self.order[s.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSeries {
    pub rows: Vec<OrderRow>,
}

impl OrderSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group_id", "week", "u_O", "u_W", "u_S", "u_C"])?;
        for r in &self.rows {
            let mut rec = vec![r.group_id.clone(), r.week.to_string()];
            rec.extend(r.order.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Weighted sum of standardized metrics within each subsystem.
pub fn order_parameters(
    std: &StandardizedPanel,
    weights: &SubsystemWeights,
) -> Result<OrderSeries, SdmError> {
    let mut w = [0.0; 9];
    for (j, &code) in TASK_CODES.iter().enumerate() {
        w[j] = weights.weight(code).ok_or(SdmError::MissingWeight(code))?;
    }
    let rows = std
        .observations
        .iter()
        .map(|o| {
            let mut order = [0.0; 4];
            for s in Subsystem::ALL {
                let sum: f64 = s
                    .codes()
                    .iter()
                    .map(|c| {
                        let j = c.task_index().expect("task code");
                        w[j] * o.values[j]
                    })
                    .sum();
                order[s.index()] = sum.clamp(0.0, 1.0);
            }
            OrderRow {
                group_id: o.group_id.clone(),
                week: o.week,
                order,
            }
        })
        .collect();
    Ok(OrderSeries { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Positive when the product of changes is positive.
    #[default]
    Prose,
    /// The negated form, `-lambda * sqrt(|product|)`.
    PaperLiteral,
}

impl SignConvention {
    pub fn label(self) -> &'static str {
        match self {
            SignConvention::Prose => "prose",
            SignConvention::PaperLiteral => "paper_literal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekLinking {
    /// Only weeks whose predecessor week is present produce a synergy value.
    #[default]
    Consecutive,
    /// Differences are taken against the group's last present week.
    BridgeGaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SynergyOptions {
    pub sign: SignConvention,
    pub linking: WeekLinking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyRow {
    pub group_id: String,
    pub week: u8,
    pub previous_week: u8,
    pub synergy: f64,
    /// Order parameter changes for O, W, S, C.
    pub deltas: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergySeries {
    pub rows: Vec<SynergyRow>,
    pub sign_convention: SignConvention,
}

impl SynergySeries {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group_id", "week", "synergy", "sign_convention"])?;
        for r in &self.rows {
            w.write_record([
                r.group_id.as_str(),
                &r.week.to_string(),
                &format!("{:.6}", r.synergy),
                self.sign_convention.label(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Synergy of one transition from the four subsystem order-parameter changes.
pub fn synergy_degree(deltas: [f64; 4], sign: SignConvention) -> f64 {
    let product: f64 = deltas.iter().product();
    if product == 0.0 {
        return 0.0;
    }
    let magnitude = product.abs().sqrt();
    let lambda = if product > 0.0 { 1.0 } else { -1.0 };
    match sign {
        SignConvention::Prose => lambda * magnitude,
        SignConvention::PaperLiteral => -lambda * magnitude,
    }
}

pub fn synergy_degrees(orders: &OrderSeries, options: SynergyOptions) -> SynergySeries {
    let mut rows_by_group: BTreeMap<&str, Vec<&OrderRow>> = BTreeMap::new();
    for r in &orders.rows {
        rows_by_group.entry(r.group_id.as_str()).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (group, mut series) in rows_by_group {
        series.sort_by_key(|r| r.week);
        for pair in series.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            if options.linking == WeekLinking::Consecutive && cur.week != prev.week + 1 {
                continue;
            }
            let mut deltas = [0.0; 4];
            for (d, (a, b)) in deltas.iter_mut().zip(cur.order.iter().zip(&prev.order)) {
                *d = a - b;
            }
            rows.push(SynergyRow {
                group_id: group.to_string(),
                week: cur.week,
                previous_week: prev.week,
                synergy: synergy_degree(deltas, options.sign),
                deltas,
            });
        }
    }
    SynergySeries {
        rows,
        sign_convention: options.sign,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SdmOptions {
    pub scope: StandardizationScope,
    pub synergy: SynergyOptions,
}

/// Every intermediate product of one model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdmRun {
    pub standardized: StandardizedPanel,
    pub weights: SubsystemWeights,
    pub orders: OrderSeries,
    pub synergy: SynergySeries,
}

/// Contents of `weights.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsReport {
    pub scope: StandardizationScope,
    pub weights: BTreeMap<Subsystem, BTreeMap<Code, f64>>,
    pub information: BTreeMap<Code, f64>,
    pub bounds: Vec<ScopeBounds>,
    pub warnings: Vec<String>,
}

impl SdmRun {
    pub fn warnings(&self) -> impl Iterator<Item = &String> {
        self.standardized
            .warnings
            .iter()
            .chain(&self.weights.warnings)
    }

    pub fn weights_report(&self) -> WeightsReport {
        WeightsReport {
            scope: self.standardized.scope,
            weights: self.weights.weights.clone(),
            information: self.weights.information.clone(),
            bounds: self.standardized.bounds.clone(),
            warnings: self.warnings().cloned().collect(),
        }
    }
}

pub fn run_model(panel: &MetricPanel, options: SdmOptions) -> Result<SdmRun, SdmError> {
    let standardized = standardize(panel, options.scope)?;
    let weights = critic_weights(&standardized)?;
    let orders = order_parameters(&standardized, &weights)?;
    let synergy = synergy_degrees(&orders, options.synergy);
    Ok(SdmRun {
        standardized,
        weights,
        orders,
        synergy,
    })
}

/// Like [`run_model`], but a panel too short for CRITIC weighting gets uniform
/// within-subsystem weights and a warning instead of an error.
pub fn run_model_lenient(panel: &MetricPanel, options: SdmOptions) -> Result<SdmRun, SdmError> {
    let standardized = standardize(panel, options.scope)?;
    let weights = match critic_weights(&standardized) {
        Err(SdmError::InsufficientObservations(_)) => uniform_weights(format!(
            "{} observation(s) cannot support CRITIC weighting; using uniform weights",
            standardized.observations.len()
        )),
        other => other?,
    };
    let orders = order_parameters(&standardized, &weights)?;
    let synergy = synergy_degrees(&orders, options.synergy);
    Ok(SdmRun {
        standardized,
        weights,
        orders,
        synergy,
    })
}

fn uniform_weights(warning: String) -> SubsystemWeights {
    let weights = Subsystem::ALL
        .iter()
        .map(|&s| {
            let w = 1.0 / s.codes().len() as f64;
            (s, s.codes().iter().map(|&c| (c, w)).collect())
        })
        .collect();
    SubsystemWeights {
        weights,
        information: BTreeMap::new(),
        warnings: vec![warning],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Normalization;
    use proptest::prelude::*;

    fn panel_from(columns: &[(Code, Vec<f64>)]) -> MetricPanel {
        let n = columns[0].1.len();
        let observations = (0..n)
            .map(|i| {
                let mut values = [0.0; 9];
                for (code, col) in columns {
                    values[code.task_index().unwrap()] = col[i];
                }
                Observation {
                    group_id: "G".into(),
                    week: i as u8,
                    values,
                }
            })
            .collect();
        MetricPanel::new(observations, Normalization::RawCount)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constant_series_is_half() {
        let panel = panel_from(&[(Code::W1, vec![4.0, 4.0, 4.0])]);
        let std = standardize(&panel, StandardizationScope::Global).unwrap();
        assert_eq!(std.column(2), vec![0.5, 0.5, 0.5]);
        let b = std.bounds[0].metrics[2];
        assert!(close(b.alpha, 4.2, 1e-12) && close(b.beta, 3.8, 1e-12));
    }

    #[test]
    fn zero_to_ten_series() {
        let panel = panel_from(&[(Code::W1, vec![0.0, 5.0, 10.0])]);
        let std = standardize(&panel, StandardizationScope::Global).unwrap();
        let u = std.column(2);
        assert_eq!(u[0], 0.0);
        assert!(close(u[1], 5.0 / 10.5, 1e-12));
        assert!(close(u[2], 10.0 / 10.5, 1e-12));
        assert!(close(u[1], 0.476190, 1e-6) && close(u[2], 0.952381, 1e-6));
    }

    #[test]
    fn all_zero_series_warns() {
        let panel = panel_from(&[(Code::W1, vec![0.0, 0.0, 0.0])]);
        let std = standardize(&panel, StandardizationScope::Global).unwrap();
        assert_eq!(std.column(2), vec![0.0; 3]);
        assert!(std.warnings.iter().any(|w| w.contains("W1")));
    }

    #[test]
    fn empty_panel() {
        let panel = MetricPanel::new(vec![], Normalization::PerMember);
        assert_eq!(
            standardize(&panel, StandardizationScope::Global),
            Err(SdmError::EmptyPanel)
        );
    }

    fn std_with(columns: &[(Code, Vec<f64>)]) -> StandardizedPanel {
        let panel = panel_from(columns);
        StandardizedPanel {
            observations: panel.observations,
            scope: StandardizationScope::Global,
            bounds: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn critic_single_metric_subsystem() {
        let std = std_with(&[(Code::C1, vec![0.1, 0.9, 0.3])]);
        let w = critic_weights(&std).unwrap();
        assert_eq!(w.weight(Code::C1), Some(1.0));
    }

    #[test]
    fn critic_anticorrelated_pair() {
        let std = std_with(&[
            (Code::O1, vec![0.0, 0.5, 1.0]),
            (Code::O2, vec![1.0, 0.5, 0.0]),
        ]);
        let w = critic_weights(&std).unwrap();
        assert!(close(w.information[&Code::O1], 1.0, 1e-12));
        assert!(close(w.information[&Code::O2], 1.0, 1e-12));
        assert!(close(w.weight(Code::O1).unwrap(), 0.5, 1e-12));
        assert!(close(w.weight(Code::O2).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn critic_identical_columns_fall_back_to_uniform() {
        let std = std_with(&[
            (Code::O1, vec![0.2, 0.5, 0.9]),
            (Code::O2, vec![0.2, 0.5, 0.9]),
        ]);
        let w = critic_weights(&std).unwrap();
        assert_eq!(w.weight(Code::O1), Some(0.5));
        assert_eq!(w.weight(Code::O2), Some(0.5));
        assert!(w.warnings.iter().any(|m| m.contains("subsystem O")));
    }

    #[test]
    fn lenient_run_accepts_a_single_observation() {
        let panel = MetricPanel::new(
            vec![Observation {
                group_id: "g".into(),
                week: 0,
                values: [1.0; 9],
            }],
            Normalization::PerMember,
        );
        assert!(run_model(&panel, SdmOptions::default()).is_err());
        let run = run_model_lenient(&panel, SdmOptions::default()).unwrap();
        assert!(run.synergy.rows.is_empty());
        assert_eq!(run.orders.rows[0].order, [0.5; 4]);
        assert_eq!(run.weights.weight(Code::O2), Some(0.5));
        assert_eq!(run.weights.weight(Code::S1), Some(1.0 / 3.0));
        assert_eq!(run.warnings().count(), 1);
    }

    #[test]
    fn critic_needs_two_observations() {
        let std = std_with(&[(Code::O1, vec![0.2])]);
        assert_eq!(
            critic_weights(&std),
            Err(SdmError::InsufficientObservations(Subsystem::O))
        );
    }

    #[test]
    fn order_parameter_examples() {
        let std = std_with(&[
            (Code::O1, vec![0.2, 0.0]),
            (Code::O2, vec![0.8, 0.0]),
            (Code::C1, vec![0.35, 0.0]),
        ]);
        let mut w = critic_weights(&std).unwrap();
        w.weights.insert(
            Subsystem::O,
            BTreeMap::from([(Code::O1, 0.5), (Code::O2, 0.5)]),
        );
        let orders = order_parameters(&std, &w).unwrap();
        assert!(close(orders.rows[0].get(Subsystem::O), 0.5, 1e-15));
        assert_eq!(orders.rows[0].get(Subsystem::C), 0.35);
        assert_eq!(orders.rows[1].get(Subsystem::O), 0.0);

        w.weights.get_mut(&Subsystem::S).unwrap().remove(&Code::S2);
        assert_eq!(
            order_parameters(&std, &w),
            Err(SdmError::MissingWeight(Code::S2))
        );
    }

    #[test]
    fn synergy_examples() {
        let c = synergy_degree([0.1, 0.2, 0.1, 0.05], SignConvention::Prose);
        assert!(close(c, 0.01, 1e-15));
        let c = synergy_degree([0.1, -0.2, 0.1, 0.05], SignConvention::Prose);
        assert!(close(c, -0.01, 1e-15));
        assert_eq!(synergy_degree([0.1, 0.0, 0.3, 0.2], SignConvention::Prose), 0.0);
        let lit = synergy_degree([0.1, 0.2, 0.1, 0.05], SignConvention::PaperLiteral);
        assert!(close(lit, -0.01, 1e-15));
    }

    fn row(g: &str, week: u8, order: [f64; 4]) -> OrderRow {
        OrderRow {
            group_id: g.into(),
            week,
            order,
        }
    }

    #[test]
    fn synergy_skips_gaps_unless_bridging() {
        let orders = OrderSeries {
            rows: vec![
                row("G8", 3, [0.5; 4]),
                row("G8", 4, [0.6; 4]),
                row("G1", 0, [0.1; 4]),
                row("G1", 2, [0.3; 4]),
                row("G1", 3, [0.2; 4]),
            ],
        };
        let s = synergy_degrees(&orders, SynergyOptions::default());
        let keys: Vec<_> = s.rows.iter().map(|r| (r.group_id.as_str(), r.week)).collect();
        assert_eq!(keys, [("G1", 3), ("G8", 4)]);
        assert!(close(s.rows[0].synergy, 0.01, 1e-12));

        let bridged = synergy_degrees(
            &orders,
            SynergyOptions {
                linking: WeekLinking::BridgeGaps,
                ..Default::default()
            },
        );
        assert_eq!(bridged.rows.len(), 3);
        assert_eq!(bridged.rows[0].previous_week, 0);
    }

    #[test]
    fn single_week_yields_no_synergy() {
        let orders = OrderSeries {
            rows: vec![row("G1", 2, [0.5; 4])],
        };
        assert!(synergy_degrees(&orders, SynergyOptions::default()).rows.is_empty());
    }

    fn arb_panel() -> impl Strategy<Value = MetricPanel> {
        prop::collection::vec(prop::array::uniform9(0u32..12), 3..20).prop_map(|rows| {
            let observations = rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| Observation {
                    group_id: format!("G{}", i % 3),
                    week: (i / 3) as u8,
                    values: r.map(|v| v as f64 / 2.0),
                })
                .collect();
            MetricPanel::new(observations, Normalization::PerMember)
        })
    }

    proptest! {
        #[test]
        fn standardization_is_monotone_and_bounded(panel in arb_panel()) {
            let std = standardize(&panel, StandardizationScope::Global).unwrap();
            for (j, &code) in TASK_CODES.iter().enumerate() {
                let raw = panel.column(code);
                let u = std.column(j);
                for a in 0..raw.len() {
                    prop_assert!((0.0..=1.0).contains(&u[a]));
                    for b in 0..raw.len() {
                        if raw[a] < raw[b] {
                            prop_assert!(u[a] < u[b]);
                        }
                    }
                }
            }
        }

        #[test]
        fn scaling_a_metric_leaves_u_unchanged(panel in arb_panel(), c in 0.1f64..20.0) {
            let mut scaled = panel.clone();
            for o in &mut scaled.observations {
                o.values[3] *= c;
            }
            let a = standardize(&panel, StandardizationScope::Global).unwrap();
            let b = standardize(&scaled, StandardizationScope::Global).unwrap();
            for (x, y) in a.column(3).iter().zip(b.column(3)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn model_outputs_ranges_and_order_invariance(panel in arb_panel(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let run = run_model(&panel, SdmOptions::default()).unwrap();
            for s in Subsystem::ALL {
                let total: f64 = run.weights.weights[&s].values().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(run.weights.weights[&s].values().all(|w| *w >= 0.0));
            }
            for r in &run.orders.rows {
                prop_assert!(r.order.iter().all(|u| (0.0..=1.0).contains(u)));
            }
            for r in &run.synergy.rows {
                prop_assert!(r.synergy.abs() <= 1.0);
                let prod: f64 = r.deltas.iter().product();
                prop_assert_eq!(r.synergy.abs(), prod.abs().sqrt());
            }
            let mut shuffled = panel.clone();
            shuffled.observations.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let again = run_model(&shuffled, SdmOptions::default()).unwrap();
            prop_assert_eq!(again, run);
        }
    }
}
