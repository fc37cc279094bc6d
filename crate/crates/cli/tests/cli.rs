use std::fs;
use std::process::{Command, Output};

use relu_varieties::report::{CONFIG_SCHEMA, PRESETS, REPORT_SCHEMA};
use serde_json::Value;

fn reluvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reluvar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = reluvar(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn validate(schema: &str, doc: &Value) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn lists_presets() {
    let out = reluvar(&["preset"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "shallow-4x4-two-block",
        "shallow-434-dimdrop",
        "shallow-434-three-block",
        "deep-2222-fig3",
        "deep-33233-ex68",
        "deep-tightness-remark",
        "multiblock-455-dim40",
        "psi-example-51",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
}

#[test]
fn every_preset_runs_and_matches_the_schema() {
    for p in PRESETS {
        let doc = report(&["preset", p.name]);
        validate(REPORT_SCHEMA, &doc);
        validate(CONFIG_SCHEMA, &doc["config"]);
        assert_eq!(doc["summary"]["all_hold"], Value::Bool(true), "{}", p.name);
    }
}

#[test]
fn four_by_four_headline_numbers() {
    let doc = report(&["preset", "shallow-4x4-two-block"]);
    assert_eq!(doc["dimension"]["jacobian_rank"], 26);
    let constraints = doc["constraints"].as_array().unwrap();
    let quartic = constraints
        .iter()
        .filter(|c| c["constraint"]["counts"]["minor_size"] == 4)
        .count();
    assert_eq!(quartic, 2);
    let cubic: u64 = constraints
        .iter()
        .filter(|c| c["constraint"]["counts"]["minor_size"] == 3)
        .map(|c| c["constraint"]["counts"]["minors"].as_u64().unwrap())
        .sum();
    assert_eq!(cubic, 16);
}

#[test]
fn alias_for_the_width_two_deep_network() {
    let doc = report(&["preset", "deep-6-8"]);
    assert_eq!(doc["dimension"]["jacobian_rank"], 6);
    assert_eq!(doc["dimension"]["ambient_dim"], 8);
}

#[test]
fn subcommands_on_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"architecture": {"widths": [2, 1, 2, 2]}, "blocks": [[[1], [1, 0]], [[1], [0, 1]]],
            "dataset": [[["1", "1"], ["2", "3"]], [["1", "2"], ["3", "1"]]],
            "verify": {"num_samples": 8}}"#,
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    let inv = report(&["invariants", "-c", path]);
    assert!(inv.get("dimension").is_none());
    assert!(inv["constraints"][0].get("verdict").is_none());
    let ver = report(&["verify", "--config", path]);
    assert_eq!(ver["constraints"][0]["verdict"]["samples_used"], 8);
    let dim = report(&["dimension", "-c", path, "--samples", "3"]);
    assert!(dim.get("constraints").is_none());
    assert_eq!(dim["config"]["verify"]["num_samples"], 3);
    let tr = report(&["transform", "-c", path]);
    assert_eq!(tr["transform"]["status"][0]["status"], "invertible");
    assert!(!tr["transform"]["constraints"].as_array().unwrap().is_empty());

    let csv_path = dir.path().join("scan.csv");
    let out = reluvar(&["regions", "-c", path, "--grid", "4", "3", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(csv_path).unwrap();
    assert_eq!(csv.lines().next(), Some("u,v,pattern_id"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn bad_rational_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"architecture": {"widths": [2, 1, 2]}, "blocks": [[[1]]], "dataset": [[["1", "2"], ["3", "1/0"]]]}"#,
    )
    .unwrap();
    let out = reluvar(&["report", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dataset[0][1][1]"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(reluvar(&["preset", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(reluvar(&["report"]).status.code(), Some(2));
    assert_eq!(reluvar(&["report", "-c", "/nonexistent/cfg.json"]).status.code(), Some(2));
    assert_eq!(reluvar(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<u8>> = [&[][..], &["--sequential"][..], &[][..]]
        .iter()
        .enumerate()
        .map(|(i, extra)| {
            let out = dir.path().join(format!("r{i}.json"));
            let mut args = vec!["preset", "shallow-434-three-block", "--seed", "7", "--out", out.to_str().unwrap()];
            args.extend_from_slice(extra);
            assert_eq!(reluvar(&args).status.code(), Some(0));
            fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let other = reluvar(&["preset", "shallow-434-three-block", "--seed", "8"]).stdout;
    assert_ne!(other, runs[0]);
}

#[test]
fn timing_is_opt_in() {
    let plain = report(&["preset", "deep-2222-fig3"]);
    assert!(plain.get("timing").is_none());
    let timed = report(&["preset", "deep-2222-fig3", "--timing"]);
    assert!(timed["timing"]["dimension_ms"].is_number());
}
