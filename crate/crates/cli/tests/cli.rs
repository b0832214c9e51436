use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Copies the named fixtures into a scratch directory so relative outputs land there.
fn scratch(names: &[&str]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for n in names {
        fs::copy(fixtures().join(n), dir.path().join(n)).unwrap();
    }
    dir
}

fn scov(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scov")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn volume_of_the_wall_space() {
    let dir = scratch(&["wall_space.toml"]);
    let o = scov(dir.path(), &["volume", "wall_space.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("V_S 20\n"), "{out}");
    assert!(out.contains("V_0 1\n"), "{out}");
    assert!(out.contains("n 20\n"), "{out}");
    assert!(out.contains("cells 20\n"), "{out}");
}

#[test]
fn malformed_configs_exit_with_two_and_name_the_field() {
    let dir = scratch(&["wall_space.toml"]);
    let text = fs::read_to_string(dir.path().join("wall_space.toml")).unwrap();
    let missing = text.replace(", upper = 20.0", "");
    assert_ne!(missing, text);
    fs::write(dir.path().join("missing.toml"), missing).unwrap();
    let o = scov(dir.path(), &["volume", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("space.continuous[0]"), "{}", stderr(&o));

    let empty = text.replace("continuous = [", "discrete = [{ name = \"lane\", values = [] }]\ncontinuous = [");
    fs::write(dir.path().join("empty.toml"), empty).unwrap();
    let o = scov(dir.path(), &["verify", "empty.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("space"), "{}", stderr(&o));

    let o = scov(dir.path(), &["verify", "absent.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_cell_fixtures_report_their_class() {
    let cases = [
        ("safe.toml", "safe_ledger.json", "safe_verified 1 "),
        ("unsafe.toml", "unsafe_ledger.json", "unsafe_observed 1 "),
        ("infeasible.toml", "infeasible_ledger.json", "safety_infeasible 1 "),
    ];
    for (cfg, ledger, expect) in cases {
        let dir = scratch(&[cfg]);
        let o = scov(dir.path(), &["verify", cfg]);
        assert!(o.status.success(), "{cfg}: {}", stderr(&o));
        assert!(stdout(&o).contains(expect), "{cfg}: {}", stdout(&o));
        let l = json(&dir.path().join("out").join(ledger));
        assert_eq!(l["schema"], "scov-ledger/1");
        assert_eq!(l["entries"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn formal_mode_on_a_black_box_is_an_engine_error() {
    let dir = scratch(&["wall_space.toml"]);
    let text = fs::read_to_string(dir.path().join("wall_space.toml")).unwrap();
    let bb = text.replace("kind = \"white_box\"", "kind = \"black_box\"");
    assert_ne!(bb, text);
    fs::write(dir.path().join("bb.toml"), bb).unwrap();
    let o = scov(dir.path(), &["verify", "bb.toml"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = scov(dir.path(), &["verify", "bb.toml", "--mode", "mixed", "--ledger", "mixed.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("safe_verified 10 "), "{}", stdout(&o));
}

#[test]
fn wall_campaign_outputs_and_golden_report() {
    let dir = scratch(&["wall_space.toml"]);
    let o = scov(dir.path(), &["verify", "wall_space.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("safe_verified 10  unsafe_observed 0  safety_infeasible 10  unknown 0"), "{out}");
    assert!(out.contains("safe_coverage 0.5  penetration_rate 1  threshold_r 0.5"), "{out}");
    let report = json(&dir.path().join("out/wall_report.json"));
    assert_eq!(report["safe_coverage"], 0.5);
    let csv = fs::read_to_string(dir.path().join("out/wall_cells.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.starts_with("cell,d,volume,outcome,method\n"), "{csv}");

    let o = scov(dir.path(), &["verify", "wall_space.toml", "--mode", "sample", "--ledger", "sample.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("unsafe_observed 10 "), "{}", stdout(&o));
    assert!(stdout(&o).contains("penetration_rate n/a"), "{}", stdout(&o));

    let o = scov(dir.path(), &["report", "sample.json", "out/wall_ledger.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = fs::read_to_string(fixtures().join("golden/wall_report.json")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch(&["wall_space.toml"]);
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let o = scov(dir.path(), &["verify", "wall_space.toml", "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        let read = |p: &str| fs::read(dir.path().join("out").join(p)).unwrap();
        runs.push((read("wall_ledger.json"), read("wall_report.json"), read("wall_cells.csv")));
    }
    assert!(runs[0] == runs[1]);
}

#[test]
fn cell_flag_verifies_one_cell() {
    let dir = scratch(&["wall_space.toml"]);
    let o = scov(dir.path(), &["verify", "wall_space.toml", "--cell", "3", "--ledger", "one.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let l = json(&dir.path().join("one.json"));
    let entries = l["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["index"], serde_json::json!([3]));
    // the other nineteen cells count as unknown
    assert!(stdout(&o).contains("safety_infeasible 1  unknown 19"), "{}", stdout(&o));

    let o = scov(dir.path(), &["verify", "wall_space.toml", "--cell", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integrator_forward_set_matches_the_interval() {
    let dir = scratch(&["integrator_reach.toml"]);
    let o = scov(dir.path(), &["reach", "integrator_reach.toml", "--spec-kind", "maxfrs"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/integrator_maxfrs.txt")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "scov-stateset 1");
    let start = body.iter().position(|l| l.starts_with("cells ")).unwrap() + 1;
    let cells: Vec<i64> = body[start..].iter().map(|l| l.parse().unwrap()).collect();
    let width = 0.1;
    let lo = -10.0 + width * *cells.iter().min().unwrap() as f64;
    let hi = -10.0 + width * (*cells.iter().max().unwrap() + 1) as f64;
    // x(2) = x0 + integral of u, |u| <= 1, x0 in [-0.45, 0.45]; outward to the grid
    let (exact_lo, exact_hi) = ((-2.45f64 / width).floor() * width, (2.45f64 / width).ceil() * width);
    assert!((lo - exact_lo).abs() <= width + 1e-9, "lo {lo}");
    assert!((hi - exact_hi).abs() <= width + 1e-9, "hi {hi}");
    assert_eq!(cells.len() as i64, cells.iter().max().unwrap() - cells.iter().min().unwrap() + 1);

    let o = scov(dir.path(), &["reach", "integrator_reach.toml", "--spec-kind", "adversarial"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = scov(dir.path(), &["reach", "integrator_reach.toml", "--spec-kind", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_writes_the_center_rollout() {
    let dir = scratch(&["wall_space.toml"]);
    let o = scov(dir.path(), &["trace", "wall_space.toml", "--cell", "15", "--out", "t.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("time,"), "{}", rows[0]);
    // 5 s at 0.01 s plus the initial sample
    assert_eq!(rows.len() - 1, 501);
}
