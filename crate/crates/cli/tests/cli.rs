use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use spade_cli::commands::{cmd_entropy_sweep, cmd_estimate_crosstalk, cmd_simulate, cmd_test, EstimateArgs, TestArgs};
use spade_cli::config::{EntropySweepConfig, SimulateConfig};
use spade_cli::CliError;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn simulate_config(dir: &Path, seed: u64) -> SimulateConfig {
    serde_json::from_value(json!({
        "seed": seed,
        "repetitions": 200,
        "calibration_repetitions": 400,
        "crosstalk": {"c10": 0.01},
        "photons": {"fixed_n": {"n_total": 1000}},
        "sweeps": [
            {"epsilon": [0.028, 0.042], "d_a": {"start": 0.1, "stop": 0.4, "steps": 4}},
            {"epsilon": {"start": 0.0, "stop": 0.1, "steps": 3}, "d_a": 0.33}
        ],
        "output": {
            "results": dir.join("results.csv"),
            "summary": dir.join("summary.json"),
            "counts": dir.join("counts.csv"),
            "calibration": dir.join("calibration.csv")
        }
    }))
    .unwrap()
}

#[test]
fn entropy_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: EntropySweepConfig = serde_json::from_value(json!({
        "epsilon": [0.0, 0.042],
        "d_a": 0.33,
        "c10": [0.01, 0.09, 0.0917, 0.0918, 0.1],
        "output": dir.path().join("e.csv"),
        "contour_output": dir.path().join("c.csv"),
    }))
    .unwrap();
    cmd_entropy_sweep(&cfg).unwrap();
    let rows = read_csv(&dir.path().join("e.csv"));
    assert_eq!(rows[0].join(","), "epsilon,d_a,C10,C01,D_Q,D_DI,D_SD_exact,D_SD_approx,advantage_ratio");
    assert_eq!(rows.len(), 11);
    for r in &rows[1..6] {
        for cell in &r[4..8] {
            assert_eq!(num(cell), 0.0, "{r:?}");
        }
    }
    let r = &rows[6];
    assert!((num(&r[4]) - 1.14345e-3).abs() < 1e-8);
    assert!((num(&r[5]) - 5.229_91e-6).abs() < 1e-10);
    assert!((num(&r[7]) - 6.3419e-5).abs() < 1e-9);
    let ratios: Vec<f64> = rows[6..].iter().map(|r| num(&r[8])).collect();
    assert!(ratios[2] > 1.0 && ratios[3] < 1.0, "{ratios:?}");
    let contour = read_csv(&dir.path().join("c.csv"));
    assert_eq!(contour[0].join(","), "C10,C01");
    assert_eq!(contour.len(), 6);
    assert!(num(&contour[1][1]) > 0.7 && num(&contour[1][1]) < 0.71);
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_config(dir.path(), 3);
    let summary = cmd_simulate(&cfg, None).unwrap();
    for key in ["config", "seed", "results", "runtime_ms", "version"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    let rows = read_csv(&dir.path().join("results.csv"));
    assert_eq!(rows[0].join(","), "epsilon,d_a,beta_hat,beta_stderr,beta_theory,beta_di_theory,n_star,alpha_hat");
    assert_eq!(rows.len(), 1 + 8 + 3);
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["results"], summary["results"]);
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_simulate(&simulate_config(a.path(), 11), Some(1)).unwrap();
    cmd_simulate(&simulate_config(b.path(), 11), Some(4)).unwrap();
    for f in ["results.csv", "counts.csv", "calibration.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(dir.path(), 5);
    cfg.override_seed(6);
    let summary = cmd_simulate(&cfg, None).unwrap();
    let first = std::fs::read(dir.path().join("results.csv")).unwrap();
    let mut echo: SimulateConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(echo.overrides, vec!["seed=6"]);
    echo.output.results = dir.path().join("again.csv");
    cmd_simulate(&echo, None).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("again.csv")).unwrap());
}

#[test]
fn zero_repetitions_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(dir.path(), 1);
    cfg.repetitions = 0;
    assert!(matches!(cmd_simulate(&cfg, None), Err(CliError::Config(_))));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn test_command_reproduces_simulated_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_config(dir.path(), 21);
    let summary = cmd_simulate(&cfg, None).unwrap();
    let out = cmd_test(&TestArgs {
        counts: dir.path().join("counts.csv"),
        alpha: 0.05,
        calibration: Some(dir.path().join("calibration.csv")),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(out["n_star"], summary["results"]["n_star"]);
    let sim_rows = summary["results"]["rows"].as_array().unwrap();
    let groups = out["groups"].as_array().unwrap();
    assert_eq!(groups.len(), sim_rows.len());
    for (g, s) in groups.iter().zip(sim_rows) {
        assert_eq!(g["epsilon"], s["epsilon"]);
        assert_eq!(g["d_a"], s["d_a"]);
        assert_eq!(g["beta_hat"], s["beta_hat"]);
    }
}

#[test]
fn test_command_examples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let zeros = write(d, "z.csv", &(0..20).fold("rep,window,n1\n".to_string(), |s, i| s + &format!("{i},cal,0\n")));
    let data = write(d, "d.csv", "rep,window,n1\n0,w,0\n1,w,1\n2,w,2\n");
    let out = cmd_test(&TestArgs { counts: data.clone(), alpha: 0.05, calibration: Some(zeros), ..Default::default() }).unwrap();
    let decisions: Vec<&str> = out["verdicts"].as_array().unwrap().iter().map(|v| v["decision"].as_str().unwrap()).collect();
    assert_eq!(decisions, ["H0", "H1", "H1"]);

    let mut cal = "rep,window,n1\n".to_string();
    for i in 0..100 {
        cal += &format!("{i},cal,{}\n", u8::from(i >= 95));
    }
    let cal = write(d, "cal.csv", &cal);
    let out = cmd_test(&TestArgs { counts: data.clone(), alpha: 0.05, calibration: Some(cal), ..Default::default() }).unwrap();
    assert_eq!(out["n_star"], 0);
    assert_eq!(out["groups"][0]["beta_hat"].as_f64().unwrap(), 1.0 / 3.0);

    let analytic = cmd_test(&TestArgs { counts: data.clone(), alpha: 0.05, c10: Some(0.01), n_total: Some(1000), ..Default::default() }).unwrap();
    assert_eq!(analytic["n_star"], 16);
    assert_eq!(analytic["threshold_source"], "analytic");

    let missing = cmd_test(&TestArgs { counts: data, alpha: 0.05, c10: Some(0.01), ..Default::default() });
    assert!(matches!(missing, Err(CliError::MissingThresholdSource)));
}

#[test]
fn estimate_crosstalk_examples() {
    let est = |n_star: f64| {
        cmd_estimate_crosstalk(&EstimateArgs { n_star: Some(n_star), n_total: Some(1000.0), alpha: 0.05, counts: None })
    };
    let v = est(15.18).unwrap();
    assert!((v["c10"].as_f64().unwrap() - 0.01).abs() < 1e-3);
    assert_eq!(v["degenerate"], false);
    let v = est(0.0).unwrap();
    assert_eq!(v["c10"].as_f64().unwrap(), 0.0);
    assert_eq!(v["degenerate"], true);
    assert!(matches!(est(500.0), Err(CliError::Regime(_))));

    let dir = tempfile::tempdir().unwrap();
    let mut text = "rep,window,n1,n_total\n".to_string();
    for i in 0..100u64 {
        text += &format!("{i},cal,{},1000\n", 5 + i % 12);
    }
    let counts = write(dir.path(), "h0.csv", &text);
    let v = cmd_estimate_crosstalk(&EstimateArgs { counts: Some(counts), alpha: 0.05, ..Default::default() }).unwrap();
    assert_eq!(v["n_star"].as_f64().unwrap(), 16.0);
    assert_eq!(v["n_total"].as_f64().unwrap(), 1000.0);
}

fn spade(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_spade")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = write(d, "bad.json", "{\"seed\": 1,\n \"nope\": true}");
    let out = spade(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let data = write(d, "d.csv", "rep,window,n1\n0,w,1\n1,w,x\n");
    let out = spade(&["test", "--counts", data.to_str().unwrap(), "--c10", "0.01", "--n-total", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let out = spade(&["test", "--counts", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = spade(&["estimate-crosstalk", "--n-star", "600", "--n-total", "1000"]);
    assert_eq!(out.status.code(), Some(4));

    let out = spade(&["estimate-crosstalk", "--n-star", "15.18", "--n-total", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["c10"].as_f64().unwrap() - 0.01).abs() < 1e-3);
}

#[test]
fn binary_simulate_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = serde_json::to_value(simulate_config(dir.path(), 1)).unwrap();
    cfg["output"]["summary"] = Value::Null;
    cfg["output"].as_object_mut().unwrap().remove("summary");
    let path = write(dir.path(), "cfg.json", &cfg.to_string());
    let out = spade(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "9",
        "--threads",
        "2",
        "--output",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["config"]["overrides"][0], "seed=9");
    assert!(dir.path().join("r.csv").exists());
}
