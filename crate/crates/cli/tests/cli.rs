use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn inertia(args: &[&str], dir: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_inertia"));
    cmd.args(args).current_dir(dir);
    match workers {
        Some(w) => cmd.env("INERTIA_WORKERS", w),
        None => cmd.env_remove("INERTIA_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn experiment(deviant: Value, honest: Value, horizon: u64) -> Value {
    json!({
        "schema": 1,
        "miners": [
            {"index": 0, "power": 0.35, "strategy": deviant},
            {"index": 1, "power": 0.65, "strategy": honest}
        ],
        "horizon": horizon,
        "seeds": {"base_seed": 3, "replications": 2}
    })
}

#[test]
fn calculators() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&inertia(
        &["calc-inertia", "--alpha", "0.3"],
        dir.path(),
        None,
    ));
    assert_eq!((v["J"].as_u64(), v["I"].as_u64()), (Some(13), Some(17)));
    assert_eq!(v["feasible"], true);
    for key in ["A", "B", "C", "D"] {
        assert!(v["residuals"][key].as_f64().unwrap() >= 0.0);
    }
    let with_margin = stdout_json(&inertia(
        &["calc-inertia", "--alpha", "0.3", "--margin", "0.001"],
        dir.path(),
        None,
    ));
    assert!(with_margin["I"].as_u64() >= v["I"].as_u64());

    let t = stdout_json(&inertia(&["threshold", "--gamma", "0.5"], dir.path(), None));
    assert!((t["threshold"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let r = stdout_json(&inertia(
        &["revenue", "--alpha", "0.3", "--gamma", "0.5"],
        dir.path(),
        None,
    ));
    assert!((r["revenue"].as_f64().unwrap() - 0.32687).abs() < 1e-5);
}

#[test]
fn bad_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = inertia(&["calc-inertia", "--alpha", "0.5"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("max_i α_i < 1/2"), "{err}");

    let out = inertia(&["simulate", "missing.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: missing.json"));

    let out = inertia(&["revenue", "--alpha", "0.3"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_with_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = experiment(
        json!({"kind": "selfish"}),
        json!({"kind": "inertial", "inertia": 4}),
        2000,
    );
    config["outputs"] = json!({
        "trace": "runs/trace-{seed}.jsonl",
        "report_csv": "runs/report.csv",
        "aggregate_json": "runs/aggregate.json"
    });
    fs::write(dir.path().join("exp.json"), config.to_string()).unwrap();
    let one = stdout_json(&inertia(&["simulate", "exp.json"], dir.path(), Some("1")));
    let two = stdout_json(&inertia(&["simulate", "exp.json"], dir.path(), Some("2")));
    assert_eq!(one, two);
    assert_eq!(one["replications"], 2);
    let runs = dir.path().join("runs");
    for file in [
        "trace-3.jsonl",
        "trace-4.jsonl",
        "report.csv",
        "aggregate.json",
    ] {
        assert!(runs.join(file).exists(), "{file}");
    }
    let written: Value =
        serde_json::from_str(&fs::read_to_string(runs.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(written, one);
}

#[test]
fn verify_exit_status_follows_the_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        // Against inertia 17 the selfish miner stays below the bound.
        (json!({"kind": "inertial", "inertia": 17}), 0),
        // Against the standard protocol it does not.
        (json!({"kind": "standard"}), 1),
    ];
    for (honest, code) in cases {
        let mut config = experiment(json!({"kind": "selfish"}), honest, 150_000);
        config["miners"][0]["power"] = json!(0.3);
        config["miners"][1]["power"] = json!(0.7);
        config["outputs"] = json!({"forensics_json": "forensics.json"});
        fs::write(dir.path().join("v.json"), config.to_string()).unwrap();
        let out = inertia(&["verify", "v.json"], dir.path(), None);
        assert_eq!(
            out.status.code(),
            Some(code),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["pass_S"], code == 0);
        assert!(dir.path().join("forensics.json").exists());
    }
}

#[test]
fn sweep_prints_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = json!({
        "schema": 1,
        "variable": "inertia",
        "grid": [2, 6],
        "template": experiment(json!({"kind": "selfish"}), json!({"kind": "inertial", "inertia": 1}), 5000),
        "output_csv": "sweep.csv"
    });
    fs::write(dir.path().join("s.json"), spec.to_string()).unwrap();
    let rows = stdout_json(&inertia(&["sweep", "s.json"], dir.path(), None));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["inertia"], 6);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
