//! The command-line runner: outputs, exit codes and frozen metric names.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wsn_hids::metrics::MetricsReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wsn-hids"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn attack_free_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = (dir.path().join("m.txt"), dir.path().join("t.log"));
    let out = run(&["run", s(&scenario("attack_free.toml")), "--metrics", s(&m), "--trace", s(&t)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = MetricsReport::parse(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(report.get_u64("false_positive_count"), Some(0));
    assert_eq!(report.get_u64("nodes.final.Member"), report.get_u64("scale.sensors"));
    assert!(std::fs::metadata(&t).unwrap().len() > 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("false positives: 0"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    let mut metrics = Vec::new();
    for i in 0..2 {
        let (m, t) = (dir.path().join(format!("m{i}")), dir.path().join(format!("t{i}")));
        let out = run(&["run", s(&scenario("wormhole.toml")), "--metrics", s(&m), "--trace", s(&t)]);
        assert!(out.status.success());
        traces.push(std::fs::read(&t).unwrap());
        metrics.push(std::fs::read(&m).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(metrics[0], metrics[1]);
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    let out = run(&["run", s(&scenario("attack_free.toml")), "--seed", "77", "--metrics", s(&m)]);
    assert!(out.status.success());
    let report = MetricsReport::parse(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(report.get("run.seed"), Some("77"));
}

#[test]
fn blackhole_file_ends_malicious() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    assert!(run(&["run", s(&scenario("blackhole.toml")), "--metrics", s(&m)]).status.success());
    let report = MetricsReport::parse(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(report.get("attack.0.detected"), Some("true"));
    assert_eq!(report.get("attack.0.final_class"), Some("Malicious"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.toml");
    std::fs::write(&f, "duration = 30000\n[schedules]\nslot_length = 5\n").unwrap();
    let out = run(&["run", s(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slot_length"));
}

#[test]
fn dangling_node_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.toml");
    std::fs::write(
        &f,
        "duration = 30000\n[[failures]]\nnode = 5000\nat = 20000\n",
    )
    .unwrap();
    let out = run(&["run", s(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failures[0].node"));
}

#[test]
fn missing_file_is_a_config_error() {
    assert_eq!(run(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(2));
}

#[test]
fn compare_self_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["run", s(&scenario("attack_free.toml")), "--metrics", s(&a)]).status.success());
    let out = run(&["compare", s(&a), s(&a)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(!text.is_empty());
    for line in text.lines() {
        assert!(line.ends_with("=1.000000"), "{line}");
    }
    assert!(run(&["run", s(&scenario("regional_failure.toml")), "--metrics", s(&b)]).status.success());
    assert_eq!(run(&["compare", s(&a), s(&b)]).status.code(), Some(4));
}

#[test]
fn every_sensor_baseline_costs_more() {
    let dir = tempfile::tempdir().unwrap();
    let (h, e) = (dir.path().join("h"), dir.path().join("e"));
    assert!(run(&["run", s(&scenario("hello_flood.toml")), "--metrics", s(&h)]).status.success());
    assert!(run(&["run", s(&scenario("hello_flood_every_sensor.toml")), "--metrics", s(&e)])
        .status
        .success());
    let out = run(&["compare", s(&e), s(&h)]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let ratio: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ratio.energy.ids_mj="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(ratio < 1.0, "{ratio}");
}

#[test]
fn metric_names_match_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    assert!(run(&["run", s(&scenario("blackhole.toml")), "--metrics", s(&m)]).status.success());
    let text = std::fs::read_to_string(&m).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, _)| k))
        .filter(|k| !k.starts_with("class."))
        .collect();
    let golden = include_str!("golden/metrics_keys.txt");
    let want: Vec<&str> = golden.lines().collect();
    assert_eq!(keys, want);
}
