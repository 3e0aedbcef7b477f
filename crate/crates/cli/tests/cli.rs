use std::fs;
use std::path::Path;
use std::process::Command;

use nuh_core::par;
use nuh_lab::{emit_plot_data, run_experiment, Experiment, ExperimentConfig};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn nuh_lab(dir: &Path, experiment: &str, cfg: &str, extra: &[&str]) -> std::process::Output {
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nuh-lab"))
        .arg(experiment)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("runs"))
        .args(extra)
        .output()
        .unwrap()
}

fn latest(dir: &Path) -> std::path::PathBuf {
    let runs = dir.join("runs");
    let name = fs::read_to_string(runs.join("latest")).unwrap();
    runs.join(name.trim())
}

#[test]
fn pliss_fixture_lists_indices() {
    let out = run_experiment(Experiment::PlissDemo, &config("{}")).unwrap();
    assert!(out.passed());
    assert_eq!(out.artifact("indices.csv").unwrap(), b"n\n1\n2\n4\n5\n");
}

#[test]
fn verify_map_certifies_defaults() {
    let out = run_experiment(Experiment::VerifyMap, &config("{}")).unwrap();
    assert!(out.passed(), "{:?}", out.invariants);
    assert!(out.statistics["sigma1"].as_f64().unwrap() >= 2.0);
}

#[test]
fn verify_map_flags_absurd_strength() {
    let out =
        run_experiment(Experiment::VerifyMap, &config(r#"{"map": {"strength": 0.9}, "verify_map": {"grid_n": 64}}"#))
            .unwrap();
    assert!(!out.passed());
}

#[test]
fn cat_stability_is_flat() {
    let cfg = config(
        r#"{"map": {"strength": 0.0}, "noise": {"streams": 50},
            "stability": {"steps": 50000, "reference_orbits": 50, "reference_steps": 50000}}"#,
    );
    let out = run_experiment(Experiment::Stability, &cfg).unwrap();
    assert!(out.passed(), "{:?}", out.invariants);
    for p in out.statistics["curve"].as_array().unwrap() {
        assert!(p["l1_distance"].as_f64().unwrap() <= 0.05);
    }
}

#[test]
fn two_attractor_has_two_basins() {
    let cfg = config(
        r#"{"noise": {"epsilon": 0.02, "streams": 40}, "basins": {"system": "two-attractor", "n_steps": 2000, "expected": 2}}"#,
    );
    let out = run_experiment(Experiment::Basins, &cfg).unwrap();
    assert!(out.passed(), "{:?}", out.invariants);
}

#[test]
fn invalid_parameters_are_usage_errors() {
    for (exp, cfg) in [
        (Experiment::Rnue, r#"{"noise": {"epsilon": -1.0}}"#),
        (Experiment::Rnue, r#"{"map": {"strength": 1.5}}"#),
        (Experiment::Stability, r#"{"stability": {"epsilons": [0.01, 0.1]}}"#),
        (Experiment::PlissDemo, r#"{"pliss_demo": {"values": [3.0]}}"#),
        (Experiment::Ulam, r#"{"experiment": "rnue"}"#),
    ] {
        let err = run_experiment(exp, &config(cfg)).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{cfg}: {err}");
    }
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let cfg = config(
        r#"{"noise": {"epsilon": 0.05, "streams": 8}, "ulam": {"grid_n": 16, "samples_per_cell": 32, "empirical_steps": 2000}}"#,
    );
    let one = par::with_workers(1, || run_experiment(Experiment::Ulam, &cfg).unwrap());
    let four = par::with_workers(4, || run_experiment(Experiment::Ulam, &cfg).unwrap());
    assert_eq!(one.artifacts, four.artifacts);
}

#[test]
fn plot_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let curve = vec![(0.1, 0.03), (1.0 / 3.0, std::f64::consts::PI), (-2.5e-300, 7e12)];
    emit_plot_data(&curve, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    let back: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(back, curve);
    assert!(emit_plot_data(&[], &path).is_err());
    assert!(emit_plot_data(&curve, &dir.path().join("missing/x.csv")).is_err());
}

#[test]
fn binary_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = nuh_lab(dir.path(), "pliss-demo", "{}", &["--seed", "5", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = latest(dir.path());
    assert!(run.file_name().unwrap().to_str().unwrap().starts_with("pliss-demo-"));
    assert_eq!(fs::read_to_string(run.join("indices.csv")).unwrap(), "n\n1\n2\n4\n5\n");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config"]["noise"]["seed"], 5);
    assert_eq!(summary["config"]["pliss_demo"]["H"], 2.0);
    assert_eq!(summary["workers"], 2);

    // a second run never overwrites the first
    let again = nuh_lab(dir.path(), "pliss-demo", "{}", &[]);
    assert_eq!(again.status.code(), Some(0));
    assert_ne!(latest(dir.path()), run);
    assert!(run.join("summary.json").exists());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nuh_lab(dir.path(), "walk", "{}", &[]).status.code(), Some(2));
    assert_eq!(nuh_lab(dir.path(), "rnue", r#"{"rnue": {"steps": 5}}"#, &[]).status.code(), Some(2));
    assert_eq!(nuh_lab(dir.path(), "rnue", "{not json", &[]).status.code(), Some(2));
    assert_eq!(nuh_lab(dir.path(), "rnue", "{}", &["--workers", "0"]).status.code(), Some(2));

    let failing = r#"{"map": {"strength": 0.9}, "verify_map": {"grid_n": 32, "cone_samples": 0}}"#;
    let out = nuh_lab(dir.path(), "verify-map", failing, &[]);
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(latest(dir.path()).join("summary.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));

    // the map is not expanding on average here, so alpha cannot be chosen
    let numerical = r#"{"map": {"strength": 0.9}, "noise": {"streams": 2}, "hyp_times": {"n_steps": 200}}"#;
    let out = nuh_lab(dir.path(), "hyp-times", numerical, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(latest(dir.path()).join("diagnostic.json")).unwrap()).unwrap();
    assert_eq!(diag["exit_code"], 1);
    assert!(diag["error"].as_str().unwrap().contains("expanding"));
}
