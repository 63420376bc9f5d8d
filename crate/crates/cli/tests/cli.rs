use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn synergy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synergy"))
        .current_dir(dir)
        .args(args)
        .env_remove("SYNERGY_TEST_UNSET_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes the bundled corpus (with the given prediction noise) into `dir`.
fn demo_files(dir: &Path, noise: &str) -> (PathBuf, PathBuf) {
    let o = synergy(dir, &["demo", "--out-dir", "seed", "--seed", "5", "--noise", noise, "--iterations", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (dir.join("seed/utterances.csv"), dir.join("seed/groups.csv"))
}

fn corpus_args<'a>(u: &'a Path, g: &'a Path) -> Vec<&'a str> {
    vec!["--utterances", u.to_str().unwrap(), "--groups", g.to_str().unwrap()]
}

#[test]
fn demo_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let o = synergy(dir.path(), &["demo", "--out-dir", "d", "--seed", "2", "--iterations", "200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = dir.path().join("d");
    for f in [
        "ingest/validation_report.json",
        "analyze/order_params.csv",
        "analyze/synergy.csv",
        "analyze/weights.json",
        "analyze/trajectories.csv",
        "validate/stats_report.json",
        "validate/permutation_null.csv",
        "compare/stats_report.json",
        "compare/descriptives.csv",
    ] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let report = json(d.join("validate/stats_report.json"));
    assert_eq!(report.as_array().unwrap().len(), 5);
    assert_eq!(report[0]["extras"]["iterations"], 200);
    let order = fs::read_to_string(d.join("analyze/order_params.csv")).unwrap();
    assert_eq!(order.lines().next(), Some("group_id,week,u_O,u_W,u_S,u_C"));
    assert_eq!(order.lines().count(), 56);
}

#[test]
fn ingest_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.1");
    let mut args = vec!["ingest", "--out-dir", "clean"];
    args.extend(corpus_args(&u, &g));
    assert_eq!(code(&synergy(dir.path(), &args)), 0);
    let report = json(dir.path().join("clean/validation_report.json"));
    assert_eq!(report["n_profiles"], 12);
    assert!(report["orphan_groups"].as_array().unwrap().is_empty());

    let text = fs::read_to_string(&g).unwrap();
    let trimmed: String = text.lines().filter(|l| !l.starts_with("G7,")).map(|l| format!("{l}\n")).collect();
    let orphan = dir.path().join("orphan.csv");
    fs::write(&orphan, trimmed).unwrap();
    let mut args = vec!["ingest", "--out-dir", "orphan"];
    args.extend(corpus_args(&u, &orphan));
    let o = synergy(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("G7"));
    let report = json(dir.path().join("orphan/validation_report.json"));
    assert_eq!(report["orphan_groups"], serde_json::json!(["G7"]));

    let missing = dir.path().join("nope.csv");
    let mut args = vec!["ingest"];
    args.extend(corpus_args(&u, &missing));
    let o = synergy(dir.path(), &args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn single_group_week_gives_header_only_synergy() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.0");
    let text = fs::read_to_string(&u).unwrap();
    let mut lines = text.lines();
    let mut kept = format!("{}\n", lines.next().unwrap());
    kept.extend(lines.filter(|l| l.split(',').nth(1) == Some("G1") && l.split(',').nth(2) == Some("0")).map(|l| format!("{l}\n")));
    let one = dir.path().join("one.csv");
    fs::write(&one, kept).unwrap();
    let mut args = vec!["analyze", "--out-dir", "one"];
    args.extend(corpus_args(&one, &g));
    let o = synergy(dir.path(), &args);
    // Profiled groups without utterances and uniform weights are both reported.
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("one/synergy.csv")).unwrap(),
        "group_id,week,synergy,sign_convention\n"
    );
    assert_eq!(fs::read_to_string(dir.path().join("one/order_params.csv")).unwrap().lines().count(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.2");
    for run in ["a", "b"] {
        for sub in ["analyze", "validate"] {
            let out = format!("{run}/{sub}");
            let mut args = vec![sub, "--out-dir", &out, "--seed", "11", "--iterations", "3000"];
            args.extend(corpus_args(&u, &g));
            assert_eq!(code(&synergy(dir.path(), &args)), 0);
        }
    }
    for f in [
        "analyze/order_params.csv",
        "analyze/synergy.csv",
        "analyze/weights.json",
        "analyze/metric_panel.csv",
        "validate/stats_report.json",
        "validate/permutation_null.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn validate_identical_codings_gives_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.0");
    let mut args = vec!["validate", "--out-dir", "v", "--seed", "3"];
    args.extend(corpus_args(&u, &g));
    assert_eq!(code(&synergy(dir.path(), &args)), 0);
    let report = json(dir.path().join("v/stats_report.json"));
    let labels: Vec<&str> = report.as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["u_O", "u_W", "u_S", "u_C", "synergy"]);
    for e in report.as_array().unwrap() {
        assert_eq!(e["p"], 1.0, "{}", e["label"]);
        assert_eq!(e["formatted"]["p"], "1.0000");
        assert_eq!(e["method"], "permutation_paired");
        assert_eq!(e["extras"]["iterations"], 10_000);
    }
}

#[test]
fn validate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.0");
    let mut args = vec!["validate"];
    args.extend(corpus_args(&u, &g));
    let o = synergy(dir.path(), &args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn compare_singleton_level_warns_and_keeps_descriptives() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.0");
    // G12 becomes the only Fail group and keeps a single week.
    let groups: String = fs::read_to_string(&g)
        .unwrap()
        .lines()
        .map(|l| {
            let l = if l.starts_with("G1,") { l.replace(",Fail,", ",Pass,") } else { l.to_string() };
            let l = if l.starts_with("G12,") { l.replace(",Excellent,", ",Fail,") } else { l };
            format!("{l}\n")
        })
        .collect();
    let utts: String = fs::read_to_string(&u)
        .unwrap()
        .lines()
        .filter(|l| !(l.split(',').nth(1) == Some("G12") && l.split(',').nth(2) != Some("0")))
        .map(|l| format!("{l}\n"))
        .collect();
    let (gp, up) = (dir.path().join("g.csv"), dir.path().join("u.csv"));
    fs::write(&gp, groups).unwrap();
    fs::write(&up, utts).unwrap();
    let mut args = vec!["compare", "--factor", "quality", "--outcome", "u_S,u_C", "--out-dir", "c"];
    args.extend(corpus_args(&up, &gp));
    let o = synergy(dir.path(), &args);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("c/stats_report.json"));
    assert_eq!(report.as_array().unwrap().len(), 2);
    for e in report.as_array().unwrap() {
        assert_eq!(e["extras"]["plan"]["chosen_test"], "kruskal_wallis");
        assert!(!e["warnings"].as_array().unwrap().is_empty());
        let fail = e["extras"]["descriptives"]
            .as_array()
            .unwrap()
            .iter()
            .find(|d| d["level"] == "Fail")
            .unwrap()
            .clone();
        assert_eq!(fail["n"], 1);
        assert!(fail["sd"].is_null());
        for ph in e["post_hoc"].as_array().unwrap() {
            assert!(!ph["label"].as_str().unwrap().contains("Fail"));
        }
    }
    let desc = fs::read_to_string(dir.path().join("c/descriptives.csv")).unwrap();
    assert!(desc.lines().any(|l| l.starts_with("quality,u_S,Fail,1,")));
}

#[test]
fn code_with_mock_transport_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let (u, _) = demo_files(dir.path(), "0.0");
    fs::write(
        dir.path().join("mock.toml"),
        "[coder]\nretry_backoff_ms = 0\ncache_dir = \"cache\"\n\n[mock]\nbuiltin = true\n",
    )
    .unwrap();
    let base = ["code", "--config", "mock.toml", "--utterances", u.to_str().unwrap()];
    let run = |out: &str| {
        let mut args = base.to_vec();
        args.extend(["--out-dir", out]);
        synergy(dir.path(), &args)
    };
    let o = run("cold");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cold = json(dir.path().join("cold/coding_report.json"));
    assert_eq!(cold["n_failed"], 0);
    assert_eq!(cold["n_coded"], cold["n_total"]);
    // Repeated messages with identical context share a prompt, hence a cache entry.
    assert_eq!(
        cold["cache_hits"].as_u64().unwrap() + cold["transport_calls"].as_u64().unwrap(),
        cold["n_total"].as_u64().unwrap()
    );
    let coded = fs::read_to_string(dir.path().join("cold/utterances_coded.csv")).unwrap();
    for l in coded.lines().skip(1) {
        let cells: Vec<&str> = l.rsplitn(3, ',').collect();
        assert_eq!(cells[0], cells[1], "{l}");
    }

    assert_eq!(code(&run("warm")), 0);
    let warm = json(dir.path().join("warm/coding_report.json"));
    assert_eq!(warm["cache_hits"], warm["n_total"]);
    assert_eq!(warm["transport_calls"], 0);
    assert_eq!(
        fs::read(dir.path().join("cold/utterances_coded.csv")).unwrap(),
        fs::read(dir.path().join("warm/utterances_coded.csv")).unwrap()
    );
}

#[test]
fn code_reports_unparseable_replies() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("utterance_id,group_id,week,seq,speaker_id,text,code_human,code_pred\n");
    for i in 0..20 {
        let text = if i % 10 == 3 { "zzz" } else { "let us plan" };
        body.push_str(&format!("u{i},G1,0,{i},s,{text},,\n"));
    }
    fs::write(dir.path().join("u.csv"), body).unwrap();
    fs::write(
        dir.path().join("mock.toml"),
        "[mock]\nrules = [[\"zzz\", \"no idea\"], [\"plan\", \"C1\"]]\n",
    )
    .unwrap();
    let o = synergy(dir.path(), &["code", "--config", "mock.toml", "--utterances", "u.csv", "--out-dir", "o", "--shot", "few"]);
    assert_eq!(code(&o), 2);
    let report = json(dir.path().join("o/coding_report.json"));
    assert_eq!(report["n_failed"], 2);
    assert_eq!(report["shot_mode"], "few_shot");
    let ids: Vec<&str> = report["failures"].as_array().unwrap().iter().map(|f| f["utterance_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["u3", "u13"]);
    assert!(report["failures"].as_array().unwrap().iter().all(|f| f["kind"] == "unparseable"));
}

#[test]
fn code_without_credentials_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (u, _) = demo_files(dir.path(), "0.0");
    fs::write(dir.path().join("http.toml"), "[coder]\napi_key_env_var = \"SYNERGY_TEST_UNSET_KEY\"\n").unwrap();
    let o = synergy(dir.path(), &["code", "--config", "http.toml", "--utterances", u.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("SYNERGY_TEST_UNSET_KEY"));
}

#[test]
fn folds_and_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (u, _) = demo_files(dir.path(), "0.1");
    let us = u.to_str().unwrap();
    assert_eq!(code(&synergy(dir.path(), &["folds", "--utterances", us, "--k", "5", "--seed", "8", "--out-dir", "f"])), 0);
    let folds = fs::read_to_string(dir.path().join("f/folds.csv")).unwrap();
    assert_eq!(folds.lines().next(), Some("utterance_id,fold_id"));

    // Predicted codes of the corpus, exported as an external predictions file.
    let fold_of: std::collections::HashMap<&str, &str> =
        folds.lines().skip(1).map(|l| l.split_once(',').unwrap()).collect();
    let mut preds = String::from("utterance_id,code_pred,fold_id\n");
    let coded = fs::read_to_string(&u).unwrap();
    assert_eq!(fold_of.len(), coded.lines().count() - 1);
    for line in coded.lines().skip(1) {
        let id = line.split(',').next().unwrap();
        let pred = line.rsplit(',').next().unwrap();
        preds.push_str(&format!("{id},{pred},{}\n", fold_of[id]));
    }
    fs::write(dir.path().join("p.csv"), preds).unwrap();
    assert_eq!(code(&synergy(dir.path(), &["evaluate", "--utterances", us, "--predictions", "p.csv", "--out-dir", "e"])), 0);
    let report = json(dir.path().join("e/evaluation_report.json"));
    assert_eq!(report["reference"], "human");
    assert_eq!(report["report"]["split_by"], "fold_id");
    assert_eq!(report["report"]["splits"].as_object().unwrap().len(), 5);
    let acc = report["report"]["pooled"]["accuracy"].as_f64().unwrap();
    assert!(acc > 0.8 && acc < 1.0, "{acc}");
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let (u, g) = demo_files(dir.path(), "0.0");
    fs::write(
        dir.path().join("run.toml"),
        format!(
            "utterances = {:?}\ngroups = {:?}\nsign = \"paper_literal\"\nout_dir = \"from_config\"\n",
            u.to_str().unwrap(),
            g.to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(code(&synergy(dir.path(), &["analyze", "--config", "run.toml"])), 0);
    assert_eq!(code(&synergy(dir.path(), &["analyze", "--config", "run.toml", "--sign", "prose", "--out-dir", "flag"])), 0);
    let lit = fs::read_to_string(dir.path().join("from_config/synergy.csv")).unwrap();
    let prose = fs::read_to_string(dir.path().join("flag/synergy.csv")).unwrap();
    assert!(lit.lines().nth(1).unwrap().ends_with(",paper_literal"));
    assert!(prose.lines().nth(1).unwrap().ends_with(",prose"));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "sign = \"sideways\"\n").unwrap();
    assert_eq!(code(&synergy(dir.path(), &["analyze", "--config", "bad.toml"])), 1);
}
