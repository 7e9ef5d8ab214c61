use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn gridseg(args: &[&str], fleet: &str, config: Option<&str>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gridseg"));
    cmd.args(args)
        .arg("--case")
        .arg(fixture("feeder_case.json"))
        .arg("--fleet")
        .arg(fixture(fleet))
        .arg("--out-dir")
        .arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(fixture(c));
    }
    cmd.output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn threat_reports_verified_overload() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(&["threat"], "feeder_fleet.csv", Some("feeder_config.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("threat_report.json"));
    let attack = &report["scenarios"][0]["attack"];
    assert_eq!(attack["overload_count"], 1);
    assert_eq!(attack["overloaded_branches"][0], "a");
    assert_eq!(attack["replay_verified"], true);
    assert!(dir.path().join("overlay_budget1.geojson").exists());
}

#[test]
fn budget_zero_gives_no_overloads() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(&["threat"], "feeder_fleet.csv", Some("feeder_budget0.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("threat_report.json"));
    assert_eq!(report["scenarios"][0]["attack"]["overload_count"], 0);
}

#[test]
fn malformed_csv_exits_with_parse_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(&["threat"], "malformed_fleet.csv", None, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn infeasible_dispatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(
        &["dispatch"],
        "feeder_fleet.csv",
        Some("feeder_overload.toml"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[scenarios]]\nname = \"x\"\nbudget = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gridseg"))
        .args(["threat", "--case"])
        .arg(fixture("feeder_case.json"))
        .arg("--fleet")
        .arg(fixture("feeder_fleet.csv"))
        .arg("--config")
        .arg(&bad)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ccg_defense_splits_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(
        &["defend", "ccg"],
        "feeder_fleet.csv",
        Some("feeder_config.toml"),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("defend_report.json"));
    let defense = &report["scenarios"][0]["defense"];
    assert_eq!(defense["segments_used"], 2);
    assert_eq!(defense["status"], "optimal");
    assert_eq!(defense["verified_overloads"], 0);
    let seg = read_json(&dir.path().join("segmentation_budget1.json"));
    assert_eq!(seg["D"], 2);
}

#[test]
fn infeasible_defense_exits_5_after_writing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(
        &["defend", "ccg"],
        "feeder_fleet.csv",
        Some("feeder_budget4.toml"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(5), "{}", stderr(&out));
    let report = read_json(&dir.path().join("defend_report.json"));
    assert_eq!(report["scenarios"][0]["defense"]["status"], "infeasible");
}

#[test]
fn uni_thres_defense() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(
        &["defend", "uni-thres", "--cs", "25"],
        "feeder_fleet.csv",
        Some("feeder_config.toml"),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("defend_report.json"));
    assert_eq!(report["scenarios"][0]["defense"]["segments_used"], 2);
}

#[test]
fn evaluate_minimal_matches_threat() {
    let dir = tempfile::tempdir().unwrap();
    let minimal = dir.path().join("minimal.json");
    std::fs::write(
        &minimal,
        r#"{"D": 1, "assignments": [
            {"operator": "A", "bus": "2", "segment": 1, "numerator": 1},
            {"operator": "A", "bus": "3", "segment": 1, "numerator": 1}],
          "segments": [{"operator": "A", "segment": 1, "used": true}]}"#,
    )
    .unwrap();
    let out = gridseg(&["threat"], "feeder_fleet.csv", Some("feeder_config.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let mut cmd_args = vec!["evaluate", "--segmentation"];
    let seg_arg = minimal.to_str().unwrap().to_owned();
    cmd_args.push(&seg_arg);
    let out = gridseg(&cmd_args, "feeder_fleet.csv", Some("feeder_config.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let threat = read_json(&dir.path().join("threat_report.json"));
    let eval = read_json(&dir.path().join("evaluate_report.json"));
    assert_eq!(threat["scenarios"][0]["attack"], eval["scenarios"][0]["attack"]);
    assert_eq!(threat["scenarios"][0]["branches"], eval["scenarios"][0]["branches"]);
}

#[test]
fn evaluate_rejects_foreign_segmentation() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(
        &["defend", "ccg"],
        "feeder_fleet.csv",
        Some("feeder_config.toml"),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let seg = dir.path().join("segmentation_budget1.json");
    let seg_arg = seg.to_str().unwrap().to_owned();
    let out = gridseg(
        &["evaluate", "--segmentation", &seg_arg],
        "other_fleet.csv",
        Some("feeder_config.toml"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(6), "{}", stderr(&out));
}

#[test]
fn reports_are_deterministic_apart_from_run_info() {
    let strip = |dir: &Path| {
        let mut v = read_json(&dir.join("defend_report.json"));
        v.as_object_mut().unwrap().remove("run_info");
        v
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = gridseg(
            &["defend", "itin-thres"],
            "feeder_fleet.csv",
            Some("feeder_config.toml"),
            dir,
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(
        serde_json::to_string(&strip(a.path())).unwrap(),
        serde_json::to_string(&strip(b.path())).unwrap()
    );
    for file in ["segmentation_budget1.json", "overlay_budget1.geojson"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap()
        );
    }
}

#[test]
fn geojson_overlay_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridseg(&["threat"], "feeder_fleet.csv", Some("feeder_config.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let geo = read_json(&dir.path().join("overlay_budget1.geojson"));
    assert_eq!(geo["type"], "FeatureCollection");
    let features = geo["features"].as_array().unwrap();
    let points = features.iter().filter(|f| f["geometry"]["type"] == "Point").count();
    let lines = features
        .iter()
        .filter(|f| f["geometry"]["type"] == "LineString")
        .count();
    assert_eq!((points, lines), (4, 3));
    let bus1 = features.iter().find(|f| f["geometry"]["type"] == "Point").unwrap();
    assert_eq!(bus1["geometry"]["coordinates"][0], 8.0);
}
