// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use parcs_core::cli::parse_csv;

fn parcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parcs")).args(args).output().expect("run parcs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn step_csv(dir: &Path) -> std::path::PathBuf {
    let file = dir.join("steps.csv");
    let mut text = String::from("signal\n");
    for t in 0..100 {
        let v = if t >= 60 { 3.0 } else if t >= 20 { 2.0 } else { 0.0 };
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(&file, text).unwrap();
    file
}

#[test]
fn detect_writes_versioned_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = step_csv(dir.path());
    let out = dir.path().join("result.json");
    let o = parcs(&["detect", "--input", path(&input), "--bootstrap", "300", "--seed", "5", "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["schema"], "parcs-result/1");
    assert_eq!(doc["method"], "parcs");
    assert_eq!((doc["T"].as_u64(), doc["N"].as_u64()), (Some(100), Some(1)));
    let mut locs: Vec<u64> = doc["accepted_cps"].as_array().unwrap().iter().map(|c| c["location"].as_u64().unwrap()).collect();
    locs.sort_unstable();
    assert_eq!(locs, vec![20, 60]);
    assert_eq!(doc["reconstructed_mean"][0].as_array().unwrap().len(), 100);
    assert_eq!(doc["parameters"]["seed"], 5);
}

#[test]
fn detect_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(parcs(&["simulate", "--scenario", "two-cp-3", "--seed", "9", "--out", path(&sim)]).status.success());
    let input = sim.join("realisation_0001.csv");
    let run = || parcs(&["detect", "--input", path(&input), "--bootstrap", "400", "--seed", "11"]).stdout;
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
    let other = parcs(&["detect", "--input", path(&input), "--bootstrap", "400", "--seed", "12"]).stdout;
    assert_ne!(a, other);
}

#[test]
fn missing_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = step_csv(dir.path());
    let o = parcs(&["detect", "--input", path(&input), "--bootstrap", "100", "--method", "cusum"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed: "));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3\n4,5\n6,7\n").unwrap();
    let o = parcs(&["detect", "--input", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ragged row 2"));

    assert_eq!(parcs(&["detect", "--input", "/nonexistent/x.csv"]).status.code(), Some(2));
    assert_eq!(parcs(&["nonsense"]).status.code(), Some(2));
    let input = step_csv(dir.path());
    assert_eq!(parcs(&["detect", "--input", path(&input), "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(parcs(&["detect", "--input", path(&input), "--block-size", "0"]).status.code(), Some(2));
    assert_eq!(parcs(&["detect", "--input", path(&input), "--method", "nope"]).status.code(), Some(2));
    assert_eq!(
        parcs(&["detect", "--input", path(&input), "--method", "cusum", "--bootstrap", "100", "--seed", "1", "--preprocess", "sqrt"])
            .status
            .code(),
        Some(0)
    );
    let neg = dir.path().join("neg.csv");
    std::fs::write(&neg, "1\n-2\n3\n4\n").unwrap();
    assert_eq!(parcs(&["detect", "--input", path(&neg), "--preprocess", "sqrt"]).status.code(), Some(2));
    assert_eq!(parcs(&["simulate", "--scenario", "unknown", "--out", path(dir.path())]).status.code(), Some(2));
    // An output path below a regular file cannot be created.
    let blocked = input.join("result.json");
    let o = parcs(&["detect", "--input", path(&input), "--bootstrap", "100", "--seed", "1", "--output", path(&blocked)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = parcs(&["simulate", "--scenario", "multivariate-9", "--realisations", "3", "--seed", "4", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["realisation_0001.csv", "realisation_0003.csv", "spec.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let x = parse_csv(std::fs::File::open(a.join("realisation_0002.csv")).unwrap()).unwrap();
    assert_eq!(x.covariates(), 9);
    let spec: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["seed"], 4);
    assert_eq!(spec["spec"]["T"], x.len());

    let long = dir.path().join("long");
    assert!(parcs(&["simulate", "--scenario", "multivariate-9", "--realisations", "3", "--seed", "4", "--out", path(&long), "--format", "long"]).status.success());
    let mut rdr = csv::Reader::from_path(long.join("realisations.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["realisation", "t", "covariate", "value"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 9 * x.len());
    // Realisation 2, covariate 4, time 7 matches the per-realisation file bit for bit.
    let row = rows
        .iter()
        .find(|r| &r[0] == "2" && &r[1] == "7" && &r[2] == "4")
        .unwrap();
    assert_eq!(row[3].parse::<f64>().unwrap(), x.column(3).values()[6]);
}

#[test]
fn simulate_then_detect_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = parcs(&["simulate", "--scenario", "amoc-grid", "--override", "T=60", "--override", "c=30", "--override", "w0=5", "--seed", "2", "--out", path(&sim)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = parcs(&["detect", "--input", path(&sim.join("realisation_0001.csv")), "--max-cps", "1", "--bootstrap", "300", "--seed", "1"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["T"], 60);
    let accepted = doc["accepted_cps"].as_array().unwrap();
    assert_eq!(accepted.len(), 1);
    assert!((accepted[0]["location"].as_i64().unwrap() - 30).abs() <= 1);
}

#[test]
fn benchmark_writes_table_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = parcs(&[
        "benchmark", "--scenario", "amoc-grid", "--methods", "parcs,cusum", "--alpha-grid", "0.05,0.2",
        "--realisations", "8", "--bootstrap", "200", "--seed", "3", "--roc", "--timings", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["condition", "method", "alpha_nominal", "type1", "type2", "acc_c1", "acc_c2", "cb_mean", "cb_median"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let t1: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&t1));
        assert!(r[6].is_empty());
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("bench.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["curves"]["parcs"]["roc"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("bench.timings.csv").exists());

    let again = dir.path().join("again.csv");
    let o = parcs(&[
        "benchmark", "--scenario", "amoc-grid", "--methods", "parcs,cusum", "--alpha-grid", "0.05,0.2",
        "--realisations", "8", "--bootstrap", "200", "--seed", "3", "--roc", "--out", path(&again),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}
