use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_killing-probe");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("KILLING_PROBE_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "flat.json", r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1]}"#);
    let o = run(&["analyze", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], "1");
    assert_eq!(report["degrees"][0]["verdict"], "DIM=3");
    assert_eq!(report["degrees"][0]["oracles"]["holonomy"]["dim"], 3);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("DIM=3"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
}

#[test]
fn unknown_metric_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"metric": {"name": "torus"}, "degrees": [1], "seeds": [1]}"#);
    let o = run(&["analyze", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "UnknownMetric");
}

#[test]
fn missing_config_and_bad_grid_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["analyze", "/nonexistent/config.json"], &[]).status.code(), Some(2));
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1], "sweep": {"amplitudes": []}}"#,
    );
    assert_eq!(run(&["sweep", &cfg], &[]).status.code(), Some(2));
    assert_eq!(run(&["rank-formula", "--n", "1", "--d", "1"], &[]).status.code(), Some(2));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        &format!(
            r#"{{"metric": {{"name": "flat"}}, "degrees": [2], "seeds": [1], "output": "{}",
                "sweep": {{"amplitudes": [0, 1e-3, 1e-2]}}}}"#,
            out.display()
        ),
    );
    let o = run(&["sweep", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "amplitude,d,seed,nontrivial_dim,gap_ratio");
    let dims: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert_eq!(dims, vec!["5", "0", "0"]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn crossvalidate_reports_nothing_to_certify_when_collapsed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv");
    let cfg = write_config(
        dir.path(),
        "cv.json",
        r#"{"metric": {"name": "flat", "perturbation": {"amplitude": 0.01, "frequency_cutoff": 2, "seed": 1}},
            "degrees": [1], "seeds": [1], "oracles": {"collocation": false, "holonomy": false}}"#,
    );
    let o = run(&["crossvalidate", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["degrees"][0]["crossvalidation"], "nothing to certify");
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"metric": {"name": "sphere_cap"}, "degrees": [1, 2], "seeds": [1, 2], "output": "unused"}"#,
    );
    let mut reports = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let o = run(&["analyze", &cfg, "--out", out.to_str().unwrap()], &[("KILLING_PROBE_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0));
        let mut v = read_json(&out.join("report.json"));
        v.as_object_mut().unwrap().remove("timings");
        v["config"]["output"] = Value::Null;
        reports.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn invalid_thread_cap_is_rejected() {
    let o = run(&["catalog", "--list"], &[("KILLING_PROBE_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn catalog_and_rank_formula() {
    let o = run(&["catalog", "--list"], &[]);
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["flat", "lorentz_flat", "sphere_cap", "liouville", "revolution", "random_analytic"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
    let o = run(&["rank-formula", "--n", "3", "--d", "1"], &[]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "rank 6\nN(3,1) 8\n");
}
