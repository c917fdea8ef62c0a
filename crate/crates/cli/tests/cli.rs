//! End-to-end checks of the ltlsim binary: exit codes, output files, and
//! run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ltlsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltlsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn bundled_topology() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/topology_ga_fl.json")
}

/// Two hubs, small tonnage: keeps end-to-end runs fast in debug builds.
fn tiny_demand(dir: &Path) -> PathBuf {
    let path = dir.join("demand.csv");
    std::fs::write(
        &path,
        "origin,destination,annual_tons\nATL,SAV,2000000\nSAV,ATL,1500000\nATL,JAX,1800000\n",
    )
    .unwrap();
    path
}

#[test]
fn validate_accepts_the_bundled_topology() {
    let out = ltlsim(&["validate", bundled_topology().to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("8 hubs, 30 arcs, max arc 5.5h"), "{stdout}");
}

#[test]
fn validate_rejects_a_slow_arc_with_machine_readable_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"hubs":[{"id":"A","name":"A","zone":"Z1"},{"id":"B","name":"B","zone":"Z2"}],
            "arcs":[{"from":"A","to":"B","miles":280.0,"hours":5.6}]}"#,
    )
    .unwrap();
    let out = ltlsim(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(parsed[0]["kind"], "relay_limit_exceeded");
    assert_eq!(parsed[0]["hours"], 5.6);
}

#[test]
fn validate_missing_file_exits_two() {
    let out = ltlsim(&["validate", "/nonexistent/topology.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_results_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let demand = tiny_demand(dir.path());
    let out_dir = dir.path().join("results");
    let args = [
        "run",
        "--scenario",
        "2",
        "--seed",
        "7",
        "--n-historical",
        "2",
        "--n-testing",
        "2",
        "--compare-baseline",
        "--demand",
        demand.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let out = ltlsim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Total Deviation"), "{stdout}");
    assert!(stdout.contains("Baseline"), "{stdout}");

    let kpis_a = std::fs::read(out_dir.join("kpis.csv")).unwrap();
    let summary_a = std::fs::read(out_dir.join("summary.json")).unwrap();
    assert!(out_dir.join("historical_pool.csv").exists());

    // identical invocation reproduces the files byte for byte
    let out = ltlsim(&args);
    assert!(out.status.success());
    assert_eq!(kpis_a, std::fs::read(out_dir.join("kpis.csv")).unwrap());
    assert_eq!(summary_a, std::fs::read(out_dir.join("summary.json")).unwrap());
}

#[test]
fn run_honors_a_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let demand = tiny_demand(dir.path());
    let out_dir = dir.path().join("out");
    let config_path = dir.path().join("run.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{"scenario": 1, "seed": 3, "n_historical": 2, "n_testing": 1,
                "demand": "{}", "out_dir": "{}", "write_dispatch_logs": true}}"#,
            demand.display(),
            out_dir.display()
        ),
    )
    .unwrap();
    // the flag overrides the config's seed
    let out = ltlsim(&["run", "--config", config_path.to_str().unwrap(), "--seed", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["master_seed"], 11);
    assert_eq!(summary["config"]["seed"], 11);
    // scenario echoed in fully resolved form
    assert_eq!(summary["config"]["scenario"]["id"], 1);
    assert_eq!(summary["config"]["scenario"]["n_testing"], 1);
    assert!(out_dir.join("dispatch_t000.csv").exists());
}

#[test]
fn rerunning_from_the_summary_echo_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let demand = tiny_demand(dir.path());
    let out_dir = dir.path().join("results");
    let out = ltlsim(&[
        "run",
        "--scenario",
        "2",
        "--seed",
        "19",
        "--n-historical",
        "2",
        "--n-testing",
        "2",
        "--jobs",
        "4",
        "--demand",
        demand.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kpis = std::fs::read(out_dir.join("kpis.csv")).unwrap();
    let summary_text = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();

    // extract the echoed config and feed it back verbatim
    let summary: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
    let echo_path = dir.path().join("echo.json");
    std::fs::write(&echo_path, summary["config"].to_string()).unwrap();
    let out = ltlsim(&["run", "--config", echo_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(kpis, std::fs::read(out_dir.join("kpis.csv")).unwrap());
    assert_eq!(
        summary_text,
        std::fs::read_to_string(out_dir.join("summary.json")).unwrap()
    );
}

#[test]
fn run_can_synthesize_demand_without_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = ltlsim(&[
        "run",
        "--scenario",
        "1",
        "--seed",
        "2",
        "--n-historical",
        "1",
        "--n-testing",
        "1",
        "--synthesize-annual-tons",
        "8000000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["synthesize_annual_tons"], 8000000.0);
    assert!(summary["feasibility"]["n_requests"].as_u64().unwrap() > 0);
}

#[test]
fn run_rejects_bad_config_keys_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    std::fs::write(&config_path, r#"{"fill_threshold": 2.5}"#).unwrap();
    let out = ltlsim(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("fill_threshold"), "{stderr}");
}

#[test]
fn report_prints_the_table_and_emits_histogram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let demand = tiny_demand(dir.path());
    let out_dir = dir.path().join("results");
    let out = ltlsim(&[
        "run",
        "--scenario",
        "1",
        "--seed",
        "5",
        "--n-historical",
        "2",
        "--n-testing",
        "2",
        "--demand",
        demand.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = ltlsim(&["report", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for label in ["Total Deviation", "Per Pound Deviation", "Average Price Per Pound"] {
        assert!(stdout.contains(label), "{stdout}");
    }
    let errors = std::fs::read_to_string(out_dir.join("pricing_errors.csv")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let bin_count = summary["histogram"]["bins"].as_array().unwrap().len();
    assert_eq!(errors.lines().count(), 1 + bin_count);
}

#[test]
fn report_on_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ltlsim(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
