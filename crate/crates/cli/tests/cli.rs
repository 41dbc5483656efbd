use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_batchbandit"));
    c.env_remove("BATCHBANDIT_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_args<'a>(out: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "--workers",
        workers,
        "simulate",
        "--dataset",
        "A",
        "--experiments",
        "1,6",
        "--runs",
        "16",
        "--batches",
        "6",
        "--batch-size",
        "200",
        "--alpha-draws",
        "1000",
        "--seed",
        "7",
        "--out",
        out,
    ]
}

#[test]
fn simulate_writes_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let mut args = simulate_args(out_s, "2");
    args.push("--keep-trajectories");
    ok(&args);

    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("metric,policy,dataset,eta,value,ci_lo,ci_hi,runs,seed"));
    for policy in ["Unif", "NB-TS", "WB-TS", "NB-TTTS", "WB-TTTS"] {
        for metric in ["fpr", "power", "precision", "regret"] {
            let prefix = format!("{metric},{policy},A,");
            assert!(csv.lines().any(|l| l.starts_with(&prefix)), "missing {prefix}");
        }
    }
    assert!(csv.lines().any(|l| l.starts_with("fpr,NB-TS,A:6,")));
    assert!(csv.lines().any(|l| l.starts_with("power,NB-TS,A:1,")));

    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["config"]["runs"], 16);
    assert_eq!(m["config"]["alpha_draws"], 1000);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);

    let traj = read_json(&out.join("trajectories.json"));
    let entries = traj.as_array().unwrap();
    assert_eq!(entries.len(), 5 * 2 * 16);
    assert_eq!(entries[0]["trajectory"]["batches"].as_array().unwrap().len(), 6);
}

#[test]
fn repeated_runs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        ok(&simulate_args(out.to_str().unwrap(), workers));
        outputs.push(fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&simulate_args(first.to_str().unwrap(), "1"));
    let second = dir.path().join("second");
    let manifest = first.join("manifest.json");
    ok(&[
        "--workers",
        "1",
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(first.join("metrics.csv")).unwrap(),
        fs::read(second.join("metrics.csv")).unwrap()
    );
    let a = read_json(&first.join("manifest.json"));
    let b = read_json(&second.join("manifest.json"));
    assert_eq!(a["config_sha256"], b["config_sha256"]);
    assert!(b["config_file_sha256"].is_string());
}

#[test]
fn export_dataset_matches_built_in_tables() {
    let out = ok(&["export-dataset", "A"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["name"], "A");
    let exps = v["experiments"].as_array().unwrap();
    assert_eq!(exps.len(), 10);
    let first: Vec<f64> = exps[0]["means"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(first, [0.872, 0.812, 0.433, 0.16, -0.125, -0.264, -0.306, -0.381, -0.536, -1.151]);
    assert_eq!(exps[5]["hypothesis"], "H0");
    assert_eq!(exps[5]["means"][0], exps[5]["means"][1]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bp.json");
    ok(&["export-dataset", "B'", "-o", path.to_str().unwrap()]);
    let v = read_json(&path);
    assert_eq!(v["experiments"][9]["k_prime"], 3);
    assert_eq!(v["experiments"][9]["trend"], "cosine_decay");
    assert_eq!(v["experiments"][9]["means"][2], 0.684);
}

#[test]
fn dataset_file_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    ok(&["export-dataset", "A", "-o", path.to_str().unwrap()]);
    let builtin = dir.path().join("builtin");
    let from_file = dir.path().join("file");
    ok(&simulate_args(builtin.to_str().unwrap(), "1"));
    let mut args = simulate_args(from_file.to_str().unwrap(), "1");
    args[3] = "--dataset-file";
    args[4] = path.to_str().unwrap();
    ok(&args);
    assert_eq!(
        fs::read(builtin.join("metrics.csv")).unwrap(),
        fs::read(from_file.join("metrics.csv")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out_s = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--dataset", "Z", "--out", out_s],
        vec!["simulate", "--dataset", "A", "--policies", "EpsGreedy", "--out", out_s],
        vec!["simulate", "--dataset", "A", "--rho", "1.5", "--out", out_s],
        vec!["simulate", "--dataset", "A", "--eta", "-1", "--runs", "2", "--out", out_s],
        vec!["simulate", "--out", out_s],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dataset": "A", "unknown_knob": 3}"#).unwrap();
    let o = run(&["simulate", "--config", bad.to_str().unwrap(), "--out", out_s]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_paths_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().join("x");
    let o = run(&["simulate", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["replay", "--log", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

fn write_log(path: &Path, batches: u32) {
    let mut s = String::from("batch,arm,count,mean,sd\n");
    for b in 1..=batches {
        for (a, m) in [0.3, 0.0, -0.1].iter().enumerate() {
            s.push_str(&format!("{b},{},300,{m},1.0\n", a + 1));
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn replay_runs_against_a_summary_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    write_log(&log, 5);
    let out = dir.path().join("replay");
    ok(&[
        "--workers",
        "1",
        "replay",
        "--log",
        log.to_str().unwrap(),
        "--best-arm",
        "1",
        "--policies",
        "Unif,WB-TS",
        "--runs",
        "30",
        "--quadrature",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let regret = |p: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(&format!("regret,{p},"))).unwrap();
        line.split(',').nth(4).unwrap().parse().unwrap()
    };
    assert!((regret("Unif") - 2.0 / 3.0).abs() < 0.01);
    assert!(regret("WB-TS") < regret("Unif"));
    assert_eq!(read_json(&out.join("manifest.json"))["config"]["batches"], 5);

    let o = run(&["replay", "--log", log.to_str().unwrap(), "--best-arm", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "replay",
        "--log",
        log.to_str().unwrap(),
        "--batches",
        "7",
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn calibrate_eta_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal");
    ok(&[
        "--workers",
        "1",
        "calibrate-eta",
        "--k-prime",
        "2",
        "--grid",
        "0.8,1.0,1.2",
        "--runs",
        "100",
        "--samples-per-arm",
        "500",
        "--quadrature",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("calibration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().skip(1).filter(|l| l.ends_with(",1")).count(), 1);
    assert_eq!(read_json(&out.join("manifest.json"))["config"]["k_prime"], 2);
}

#[test]
fn bias_demo_writes_summary_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bias");
    ok(&[
        "--workers",
        "1",
        "bias-demo",
        "--rules",
        "NB-TS,WB-TTTS",
        "--runs",
        "200",
        "--quadrature",
        "--samples",
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary = fs::read_to_string(out.join("bias_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    assert!(summary.lines().any(|l| l.starts_with("WB-TTTS,WB,200,")));
    assert!(out.join("bias_histogram.csv").exists());
    let samples = fs::read_to_string(out.join("bias_samples_NB-TS.csv")).unwrap();
    assert_eq!(samples.lines().count(), 201);
    let o = run(&["bias-demo", "--rules", "Unif", "--runs", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_writes_summary_and_alphas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    ok(&[
        "--workers",
        "1",
        "convergence",
        "--k",
        "4",
        "--k-prime",
        "2",
        "--rule",
        "nb-ttts",
        "--runs",
        "60",
        "--batches",
        "5",
        "--quadrature",
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary = fs::read_to_string(out.join("convergence_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("4,2,NB-TTTS,"));
    let alphas = fs::read_to_string(out.join("convergence_alphas.csv")).unwrap();
    assert_eq!(alphas.lines().count(), 61);
}
