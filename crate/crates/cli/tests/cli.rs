use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "models", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_cirregime")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json: Value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("stdout is not one JSON document ({e}): {stdout}"));
    (out.status.code().unwrap(), json, String::from_utf8(out.stderr).unwrap())
}

#[test]
fn validate_exit_codes() {
    let (code, json, _) = run(&["validate", &model("light.json")]);
    assert_eq!(code, 0);
    assert_eq!(json["usable"], true);
    assert!(json["manifest"]["model_sha256"].as_str().unwrap().len() == 64);

    let (code, json, _) = run(&["validate", &model("h1_violating.json")]);
    assert_eq!(code, 1);
    assert_eq!(json["first_failure"], "H1");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"regimes\": 2,\n \"a\": [1,").unwrap();
    let (code, json, _) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(json["error"].as_str().unwrap().contains("line 2"));

    std::fs::write(&bad, r#"{"regimes": 1, "a": [1], "b": [2], "sigma": [1], "Q": [[0]], "extra": 1}"#).unwrap();
    assert_eq!(run(&["validate", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn classify_reference_models() {
    let (code, json, _) = run(&["classify", &model("heavy.json")]);
    assert_eq!(code, 0);
    assert_eq!(json["recurrence"], "PositiveRecurrent");
    assert_eq!(json["tail"]["kind"], "HeavyTailed");
    assert!((json["tail"]["kappa"].as_f64().unwrap() - 1.5).abs() < 1e-6);

    let (_, json, _) = run(&["classify", &model("light.json")]);
    assert_eq!(json["tail"]["kind"], "LightTailed");
    assert!((json["tail"]["delta_max"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let (code, json, _) = run(&["classify", &model("transient.json")]);
    assert_eq!(code, 0);
    assert_eq!(json["recurrence"], "Transient");
    assert!(json.get("tail").is_none());
}

#[test]
fn classify_state_dependent_with_orderings() {
    let (code, json, _) = run(&["classify", &model("state_dependent.json"), "--orderings", "2,1"]);
    assert_eq!(code, 0);
    assert_eq!(json["recurrence"], "PositiveRecurrent");
    assert!(json["witness"]["ordering"].is_array());

    let (code, _, _) = run(&["classify", &model("state_dependent.json"), "--orderings", "1,1"]);
    assert_eq!(code, 2);
}

#[test]
fn classify_with_p_grid_adds_curve() {
    let (_, json, _) = run(&["classify", &model("heavy.json"), "--p-grid", "0,1,2"]);
    let eta = json["curve"]["eta"].as_array().unwrap();
    assert_eq!(eta.len(), 3);
    assert!(eta[0].as_f64().unwrap().abs() < 1e-10);
    assert!(eta[1].as_f64().unwrap() > 0.0 && eta[2].as_f64().unwrap() < 0.0);
}

#[test]
fn spectral_brackets_kappa_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let (code, json, _) =
        run(&["spectral", &model("heavy.json"), "--p-max", "3", "--p-steps", "31", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let bracket: Vec<f64> = json["sign_change"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(bracket[0] <= 1.5 + 1e-9 && 1.5 <= bracket[1] && bracket[1] - bracket[0] < 0.1 + 1e-9);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,eta"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!(first[1].abs() < 1e-10);
    assert!(dir.path().join("curve.csv.manifest.json").exists());

    let (_, json, _) = run(&["spectral", &model("light.json")]);
    assert_eq!(json["kappa"], "inf");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let (code, _, _) = run(&[
            "simulate", &model("heavy.json"), "--horizon", "2", "--dt", "0.1", "--paths", "3", "--seed", "7",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("path_id,t,r,regime\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 21);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        run(&[
            "--threads", threads, "simulate", &model("heavy.json"), "--horizon", "1", "--dt", "0.1", "--paths", "8",
            "--out", out.to_str().unwrap(),
        ]);
        texts.push(std::fs::read_to_string(out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn simulate_contract_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    let (code, json, _) = run(&["simulate", &model("state_dependent.json"), "--horizon", "1", "--dt", "0.1", "--out", out]);
    assert_eq!(code, 1);
    assert!(json["error"].as_str().unwrap().contains("FullTruncationEuler"));
    let (code, _, _) = run(&[
        "simulate", &model("state_dependent.json"), "--scheme", "euler", "--horizon", "1", "--dt", "0.1", "--out", out,
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["simulate", &model("heavy.json"), "--horizon", "1", "--dt", "0", "--out", out]);
    assert_eq!(code, 2);
}

#[test]
fn tails_small_n_warns_and_transient_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, json, stderr) = run(&[
        "tails", &model("light.json"), "--n", "500", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(!json["warnings"].as_array().unwrap().is_empty());
    assert!(stderr.contains("warning"));
    assert!(dir.path().join("hill_sweep.csv").exists());
    assert!(dir.path().join("moments.csv.manifest.json").exists());

    let (code, json, _) = run(&["tails", &model("transient.json"), "--n", "500"]);
    assert_eq!(code, 1);
    assert!(json["error"].as_str().unwrap().contains("positive recurrent"));
}

#[test]
fn bessel_check_passes_on_reference_model() {
    let (code, json, _) = run(&["bessel-check", &model("heavy.json")]);
    assert_eq!(code, 0, "{json}");
    assert_eq!(json["pass"], true);
    assert!(json["ks"].as_f64().unwrap() < 0.02);
    assert_eq!(run(&["bessel-check", &model("heavy.json"), "--n", "0"]).0, 2);
}

#[test]
fn ergodic_functionals() {
    let (code, json, _) = run(&["ergodic", &model("heavy.json"), "--f", "one", "--horizon", "50"]);
    assert_eq!(code, 0);
    assert!((json["average"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let (_, json, _) = run(&["ergodic", &model("light.json"), "--f", "regime:1", "--horizon", "10000"]);
    assert!((json["average"].as_f64().unwrap() - 0.5).abs() < 0.01);

    let (code, json, _) = run(&["ergodic", &model("heavy.json"), "--f", "value^p:2", "--horizon", "50"]);
    assert_eq!(code, 0);
    assert_eq!(json["integrable"], false);

    assert_eq!(run(&["ergodic", &model("heavy.json"), "--f", "cube"]).0, 2);
    assert_eq!(run(&["ergodic", &model("heavy.json"), "--f", "regime:3"]).0, 2);
}
