use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use synergy_core::analysis::{compare_groups, compare_sources, model_for_source, Factor, Outcome};
use synergy_core::coder::{code_corpus, HttpTransport, MockTransport, ShotMode, Transport};
use synergy_core::corpus::{write_group_profiles_csv, write_utterances_csv, InputFormat};
use synergy_core::evalkit::{evaluate_predictions, parse_predictions, stratified_kfold, write_folds_csv};
use synergy_core::stats::{OmnibusOptions, ReportEntry};
use synergy_core::synthetic::{demo_corpus, demo_profiles, keyword_rules};
use synergy_core::{
    aggregate_metrics, parse_group_profiles, parse_utterances, run_model_lenient, validate_corpus,
    Codebook, CodeSource, GroupProfile, SdmRun, Subsystem, Utterance,
};

use crate::config::RunConfig;
use crate::output::{ensure_dir, write_json, write_with};
use crate::{FactorArg, ShotArg, Status};

const HISTOGRAM_BINS: usize = 50;

fn load_utterances(cfg: &RunConfig) -> Result<Vec<Utterance>> {
    let path = cfg.utterances()?;
    parse_utterances(path, InputFormat::from_path(path)).with_context(|| format!("reading {}", path.display()))
}

fn load_profiles(cfg: &RunConfig) -> Result<Vec<GroupProfile>> {
    let path = cfg.groups()?;
    parse_group_profiles(path).with_context(|| format!("reading {}", path.display()))
}

/// Utterances and profiles, with the validation warnings folded into `status`.
fn load_corpus(cfg: &RunConfig, status: &mut Status) -> Result<(Vec<Utterance>, Vec<GroupProfile>)> {
    let us = load_utterances(cfg)?;
    let ps = load_profiles(cfg)?;
    status.extend(&validate_corpus(&us, &ps).warnings);
    Ok((us, ps))
}

fn source_label(s: CodeSource) -> &'static str {
    match s {
        CodeSource::Human => "human",
        CodeSource::Pred => "pred",
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<Status> {
    let us = load_utterances(cfg)?;
    let ps = load_profiles(cfg)?;
    let report = validate_corpus(&us, &ps);
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir, "validation_report.json", &report)?;
    let mut status = Status::default();
    status.extend(&report.warnings);
    Ok(status)
}

pub fn code(cfg: &RunConfig, shot: ShotArg, output: Option<PathBuf>) -> Result<Status> {
    let us = load_utterances(cfg)?;
    let codebook = match &cfg.codebook {
        Some(p) => Codebook::from_csv_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => Codebook::builtin(),
    };
    let mode = match shot {
        ShotArg::Zero => ShotMode::ZeroShot,
        ShotArg::Few => ShotMode::FewShot,
    };
    let transport: Box<dyn Transport> = match &cfg.mock {
        Some(m) => {
            let mut rules = m.rules.clone();
            if m.builtin {
                rules.extend(keyword_rules());
            }
            Box::new(MockTransport::keywords(rules, m.fallback.as_deref().unwrap_or("I")))
        }
        None => Box::new(HttpTransport::from_config(&cfg.coder)?),
    };
    let (coded, report) = code_corpus(&us, &codebook, &cfg.coder, mode, transport.as_ref())?;
    ensure_dir(&cfg.out_dir)?;
    let path = output.unwrap_or_else(|| cfg.out_dir.join("utterances_coded.csv"));
    write_utterances_csv(&path, &coded)?;
    write_json(&cfg.out_dir, "coding_report.json", &report)?;
    let mut status = Status::default();
    if report.n_failed > 0 {
        status.warn(format!(
            "{} of {} utterances could not be coded; see coding_report.json",
            report.n_failed, report.n_total
        ));
    }
    Ok(status)
}

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    group_id: &'a str,
    subsystem: &'static str,
    week: u8,
    order: String,
}

fn write_model_outputs(dir: &Path, run: &SdmRun) -> Result<()> {
    write_with(dir, "order_params.csv", |w| run.orders.write_csv(w))?;
    write_with(dir, "synergy.csv", |w| run.synergy.write_csv(w))?;
    write_json(dir, "weights.json", &run.weights_report())?;
    write_with(dir, "trajectories.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        for s in Subsystem::ALL {
            for r in &run.orders.rows {
                w.serialize(TrajectoryRow {
                    group_id: &r.group_id,
                    subsystem: s.label(),
                    week: r.week,
                    order: format!("{:.6}", r.get(s)),
                })?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

pub fn analyze(cfg: &RunConfig) -> Result<Status> {
    let mut status = Status::default();
    let (us, ps) = load_corpus(cfg, &mut status)?;
    let panel = aggregate_metrics(&us, &ps, cfg.aggregate)?;
    let run = run_model_lenient(&panel, cfg.sdm)?;
    ensure_dir(&cfg.out_dir)?;
    write_with(&cfg.out_dir, "metric_panel.csv", |w| panel.write_csv(w))?;
    write_model_outputs(&cfg.out_dir, &run)?;
    status.extend(run.warnings());
    Ok(status)
}

#[derive(Serialize)]
struct NullBin {
    outcome: &'static str,
    bin_start: f64,
    bin_end: f64,
    count: u64,
    observed: f64,
}

pub fn validate(cfg: &RunConfig) -> Result<Status> {
    let seed = cfg.seed()?;
    let mut status = Status::default();
    let (us, ps) = load_corpus(cfg, &mut status)?;
    let human = model_for_source(&us, &ps, cfg.aggregate, CodeSource::Human, cfg.sdm)?;
    let pred = model_for_source(&us, &ps, cfg.aggregate, CodeSource::Pred, cfg.sdm)?;
    status.extend(human.warnings());
    status.extend(pred.warnings());
    let comparisons = compare_sources(&human, &pred, cfg.iterations, seed)?;

    let mut entries = Vec::new();
    let mut bins = Vec::new();
    for c in &comparisons {
        let label = c.outcome.label();
        let both = c.outcome.values(&human).len().max(c.outcome.values(&pred).len());
        if c.pairs < both {
            status.warn(format!("{label}: {} observation(s) present under only one code source", both - c.pairs));
        }
        status.extend(&c.result.warnings);
        entries.push(
            ReportEntry::from_result(label, &c.result)
                .with_extra("reference", "human")
                .with_extra("candidate", "pred")
                .with_extra("pairs", c.pairs)
                .with_extra("mean_reference", c.mean_reference)
                .with_extra("mean_candidate", c.mean_candidate),
        );
        let h = c.null.histogram(HISTOGRAM_BINS);
        for (i, &count) in h.counts.iter().enumerate() {
            bins.push(NullBin {
                outcome: label,
                bin_start: h.edges[i],
                bin_end: h.edges[i + 1],
                count,
                observed: h.observed,
            });
        }
    }
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir, "stats_report.json", &entries)?;
    write_with(&cfg.out_dir, "permutation_null.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        for b in &bins {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    })?;
    for (name, run) in [("human", &human), ("pred", &pred)] {
        let dir = cfg.out_dir.join(name);
        ensure_dir(&dir)?;
        write_model_outputs(&dir, run)?;
    }
    Ok(status)
}

#[derive(Serialize)]
struct DescriptiveRow<'a> {
    factor: &'a str,
    outcome: &'a str,
    level: &'a str,
    n: usize,
    mean: f64,
    sd: Option<f64>,
}

pub fn compare(cfg: &RunConfig, factors: &[FactorArg], outcomes: &[String]) -> Result<Status> {
    let mut status = Status::default();
    let (us, ps) = load_corpus(cfg, &mut status)?;
    let outcomes: Vec<Outcome> = if outcomes.is_empty() {
        Outcome::ALL.to_vec()
    } else {
        outcomes
            .iter()
            .map(|o| o.parse().map_err(|_| anyhow::anyhow!("unknown outcome {o:?}")))
            .collect::<Result<_>>()?
    };
    if factors.is_empty() {
        bail!("at least one --factor is needed");
    }
    let panel = aggregate_metrics(&us, &ps, cfg.aggregate)?;
    let run = run_model_lenient(&panel, cfg.sdm)?;
    status.extend(run.warnings());
    let options = OmnibusOptions {
        alpha: cfg.alpha,
        holm: cfg.holm,
        force: None,
    };
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for &f in factors {
        let factor = match f {
            FactorArg::ProblemType => Factor::ProblemType,
            FactorArg::Quality => Factor::Quality,
            FactorArg::Homogeneity => Factor::Homogeneity,
        };
        for o in compare_groups(&run, &ps, factor, &outcomes, &options)? {
            for w in &o.warnings {
                status.warn(format!("{} ~ {}: {w}", o.plan.outcome, o.plan.factor));
            }
            entries.push(ReportEntry::from_omnibus(&o));
            rows.extend(o.descriptives.iter().map(|d| {
                (
                    o.plan.factor.clone(),
                    o.plan.outcome.clone(),
                    d.level.clone(),
                    d.n,
                    d.mean,
                    d.sd,
                )
            }));
        }
    }
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir, "stats_report.json", &entries)?;
    write_with(&cfg.out_dir, "descriptives.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        for (factor, outcome, level, n, mean, sd) in &rows {
            w.serialize(DescriptiveRow {
                factor,
                outcome,
                level,
                n: *n,
                mean: *mean,
                sd: *sd,
            })?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(status)
}

pub fn evaluate(cfg: &RunConfig, predictions: &Path) -> Result<Status> {
    let us = load_utterances(cfg)?;
    let rows = parse_predictions(predictions)?;
    let report = evaluate_predictions(&us, cfg.aggregate.code_source, &rows)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(
        &cfg.out_dir,
        "evaluation_report.json",
        &serde_json::json!({
            "reference": source_label(cfg.aggregate.code_source),
            "predictions": predictions.display().to_string(),
            "report": report,
        }),
    )?;
    Ok(Status::default())
}

pub fn folds(cfg: &RunConfig, k: usize) -> Result<Status> {
    let seed = cfg.seed()?;
    let us = load_utterances(cfg)?;
    let source = cfg.aggregate.code_source;
    let labels = us
        .iter()
        .map(|u| {
            u.code(source)
                .with_context(|| format!("utterance {} has no {} code", u.utterance_id, source_label(source)))
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = stratified_kfold(&labels, k, seed)?;
    ensure_dir(&cfg.out_dir)?;
    write_folds_csv(&cfg.out_dir.join("folds.csv"), &us, &folds)?;
    let mut status = Status::default();
    status.extend(&folds.warnings);
    Ok(status)
}

pub fn demo(cfg: &RunConfig, noise: f64) -> Result<Status> {
    if !(0.0..=1.0).contains(&noise) {
        bail!("noise must lie in [0, 1], got {noise}");
    }
    let seed = cfg.seed.unwrap_or(1);
    let root = &cfg.out_dir;
    ensure_dir(root)?;
    let utterances = root.join("utterances.csv");
    let groups = root.join("groups.csv");
    write_utterances_csv(&utterances, &demo_corpus(seed, noise))?;
    write_group_profiles_csv(&groups, &demo_profiles())?;
    let sub = |name: &str| RunConfig {
        utterances: Some(utterances.clone()),
        groups: Some(groups.clone()),
        seed: Some(seed),
        out_dir: root.join(name),
        ..cfg.clone()
    };
    let mut status = Status::default();
    let mut log = std::io::stdout().lock();
    for (name, stage) in [
        ("ingest", ingest as fn(&RunConfig) -> Result<Status>),
        ("analyze", analyze),
        ("validate", validate),
        ("compare", |c: &RunConfig| {
            compare(c, &[FactorArg::ProblemType, FactorArg::Quality], &[])
        }),
    ] {
        let s = stage(&sub(name)).with_context(|| format!("demo stage {name}"))?;
        writeln!(log, "{name}: {} warning(s) -> {}", s.warnings.len(), root.join(name).display())?;
        status.warnings.extend(s.warnings);
    }
    Ok(status)
}
