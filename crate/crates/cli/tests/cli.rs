use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cliqueparcel")).args(args).output().unwrap()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let trec = fixture("trec_short.jsonl");
    let o = cli(&["run", "--dataset", path_str(&trec), "--methods", "RC,ALC", "--repetitions", "1", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let methods: Vec<&str> = report["per_method"].as_array().unwrap().iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["SEPARATE", "RC", "ALC"]);
    assert_eq!(report["template_version"], "cliqueparcel-v1");
    assert!(out.with_extension("txt").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("SEPARATE"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let squad = fixture("squad_long.jsonl");
    let out = dir.path().join("report.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = cli(&["run", "--dataset", path_str(&squad), "--seed", "7", "--repetitions", "2", "--deterministic-report", "--out", path_str(&out)]);
        assert!(o.status.success());
        runs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn missing_dataset_exits_2() {
    let o = cli(&["run", "--dataset", "/nonexistent/data.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(cli(&["run", "--config", path_str(&cfg)]).status.code(), Some(1));
    let trec = fixture("trec_short.jsonl");
    assert_eq!(cli(&["run", "--dataset", path_str(&trec), "--batch-size", "0"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--dataset", path_str(&trec), "--methods", "XYZ"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn replay_without_cache_entries_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("empty.jsonl");
    let trec = fixture("trec_short.jsonl");
    let o = cli(&["run", "--dataset", path_str(&trec), "--backend", "replay", "--cache", path_str(&cache)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_emits_decreasing_times() {
    let squad = fixture("squad_long.jsonl");
    let o = cli(&["sweep", "--dataset", path_str(&squad), "--method", "RC", "--sizes", "1,2,4,8"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "total_time_s").unwrap();
    let g = header.iter().position(|h| *h == "gain").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let times: Vec<f64> = rows.iter().map(|r| r[t].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    assert_eq!(rows[0][g].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn stats_reports_dispersion() {
    let o = cli(&["stats", "--dataset", path_str(&fixture("squad_long.jsonl"))]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("metric,value\nprompts,21\n"));
    assert!(csv.contains("bin_lo,bin_hi,count"));
    assert_eq!(cli(&["stats", "--dataset", "/nonexistent.jsonl"]).status.code(), Some(2));
}

#[test]
fn fit_cost_model_recovers_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("timings.csv");
    let mut csv = String::from("in_tokens,out_tokens,seconds\n");
    for (i, o) in [(100, 10), (250, 40), (400, 5), (800, 120), (50, 60), (1200, 30)] {
        csv.push_str(&format!("{i},{o},{}\n", 0.7 + 0.002 * i as f64 + 0.03 * o as f64));
    }
    std::fs::write(&log, csv).unwrap();
    let o = cli(&["fit-cost-model", "--log", path_str(&log)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((fit["base_seconds"].as_f64().unwrap() - 0.7).abs() < 1e-6);
    assert!((fit["in_coeff"].as_f64().unwrap() - 0.002).abs() < 1e-6);
    assert!((fit["out_coeff"].as_f64().unwrap() - 0.03).abs() < 1e-6);
}
