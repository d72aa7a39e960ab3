use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use generals_core::mapgen::{parse_map_text, validate, MapSpec};

fn generals(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_generals")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generated_map_round_trips_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.txt", "b.txt"] {
        let out = generals(&["generate-map", "--seed", "7", "--out", name], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = fs::read_to_string(dir.path().join("a.txt")).unwrap();
    let b = fs::read_to_string(dir.path().join("b.txt")).unwrap();
    assert_eq!(a, b);
    let layout = parse_map_text(&a).unwrap();
    assert!(validate(&layout, &MapSpec::default()).is_empty());

    let out = generals(&["check-map", "a.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn infeasible_map_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let out = generals(&["generate-map", "--min-general-distance", "100", "--max-attempts", "20"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("BFS steps apart"), "{}", stderr(&out));

    let out = generals(&["generate-map", "--height", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_map_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.txt"), "A.B\n").unwrap();
    let out = generals(&["check-map", "tiny.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("violation"));
}

#[test]
fn series_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for run in ["r1", "r2"] {
        let out = generals(&["series", "--games", "100", "--seed", "11", "--out", run], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
        reports.push(fs::read(dir.path().join(run).join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["pairs"][0]["games"], 100);
}

#[test]
fn round_robin_with_elo() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "agents = [\"expander\", \"random\", \"pass\"]\ngames = 6\nseed = 5\n[elo]\nanchor = \"random\"\nrating = 1500.0\n",
    )
    .unwrap();
    let out = generals(&["--format", "json", "tournament", "--spec", "run.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let pairs = report["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    for p in pairs {
        let (lo, hi, rate) = (p["ci_low"].as_f64().unwrap(), p["ci_high"].as_f64().unwrap(), p["rate_a"].as_f64().unwrap());
        assert!(lo <= rate && rate <= hi);
    }
    let ratings = &report["elo"]["ratings"];
    assert_eq!(ratings["random"].as_f64().unwrap(), 1500.0);
    assert!(ratings["expander"].as_f64().unwrap() > 1500.0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "gamez = 3\n").unwrap();
    let out = generals(&["series", "--spec", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = generals(&["series", "--spec", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = generals(&["match", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_zero_duration_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = generals(&["--format", "json", "bench", "--seconds", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["steps"], 0);
    assert_eq!(report["per_env"].as_array().unwrap().len(), 0);
}

#[test]
fn replay_verify_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = generals(&["match", "--seed", "4", "--out", "m", "--replay"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let replay = dir.path().join("m").join("replay.jsonl");
    assert!(replay.exists());

    let out = generals(&["replay", "verify", "m/replay.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("Verified"));

    let out = generals(&["replay", "render", "m/replay.jsonl", "--perspective", "player0", "--out", "frames"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let first = fs::read_to_string(dir.path().join("frames").join("frame_00000.txt")).unwrap();
    assert!(first.contains("~~~~~"));
    assert!(first.lines().skip(1).all(|row| !row.contains("Bg")));
    let full = generals(&["replay", "render", "m/replay.jsonl", "--perspective", "full"], dir.path());
    assert!(!stdout(&full).contains("~~~~~"));

    // a tampered final hash must be caught
    let text = fs::read_to_string(&replay).unwrap();
    let hash_at = text.rfind("\"final_hash\":\"").unwrap() + "\"final_hash\":\"".len();
    let mut tampered = text.clone();
    tampered.replace_range(hash_at..hash_at + 16, "0123456789abcdef");
    fs::write(dir.path().join("tampered.jsonl"), tampered).unwrap();
    let out = generals(&["replay", "verify", "tampered.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("Divergence"));

    fs::write(dir.path().join("bad.jsonl"), "not json\n").unwrap();
    let out = generals(&["replay", "verify", "bad.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn script_emits_one_line_per_step() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("map.txt"), "A..\n...\n..B\n").unwrap();
    fs::write(dir.path().join("moves.jsonl"), "[[1,0,0,0,0],[1,0,0,0,0]]\n[[0,0,0,3,0],[9,9,9,9,9]]\n").unwrap();
    let out = generals(&["script", "--map", "map.txt", "--actions", "moves.jsonl"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["tick"], 2);
    assert_eq!(lines[2]["malformed"], serde_json::json!([false, true]));
}
