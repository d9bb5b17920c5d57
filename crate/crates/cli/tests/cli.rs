use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn graphgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphgame")).args(args).output().expect("failed to launch graphgame")
}

fn run(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    graphgame(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

#[test]
fn analyze_lists_every_profile_of_an_isolated_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", &f("isolated.json")], dir.path());
    assert!(out.status.success());
    let report = json(&dir.path().join("equilibria.json"));
    assert_eq!(report["equilibria"].as_array().unwrap().len(), 4);
}

#[test]
fn analyze_pennies_has_no_equilibrium_and_gives_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["analyze", &f("matching_pennies.json")], dir.path()).status.success());
    let report = json(&dir.path().join("equilibria.json"));
    assert!(report["equilibria"].as_array().unwrap().is_empty());
    for p in report["profiles"].as_array().unwrap() {
        assert!(!p["violations"].as_array().unwrap().is_empty());
    }
}

#[test]
fn malformed_payoffs_exit_2_with_shape_message() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("bad.json");
    fs::write(
        &game,
        r#"{"players": ["a", "b"], "coalitions": [["a"], ["b"]], "strategies": [["x", "y"], ["x", "y"]],
            "payoffs": [[1, 2, 3], [1, 2, 3, 4]], "graph": "complete"}"#,
    )
    .unwrap();
    let out = run(&["analyze", game.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape"));
}

#[test]
fn syntax_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("broken.json");
    fs::write(&game, "{\n  \"players\": [\"a\",\n}").unwrap();
    let out = run(&["analyze", game.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn mixed_writes_profile_for_pennies() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["mixed", &f("matching_pennies.json")], dir.path()).status.success());
    let m = json(&dir.path().join("mixed.json"));
    for name in ["row", "col"] {
        for x in m[name].as_array().unwrap() {
            assert!((x.as_f64().unwrap() - 0.5).abs() < 1e-6);
        }
    }
}

#[test]
fn solver_cap_exits_5() {
    // Five-strategy cyclic zero-sum game: no pure equilibrium, too large for
    // support enumeration, and fictitious play needs far more than 10 rounds.
    let mut row = Vec::new();
    for i in 0..5i32 {
        for j in 0..5i32 {
            row.push(match (j - i).rem_euclid(5) {
                0 => 0,
                1 | 2 => 1,
                _ => -1,
            });
        }
    }
    let col: Vec<i32> = row.iter().map(|x| -x).collect();
    let game = serde_json::json!({
        "players": ["a", "b"],
        "coalitions": [["a"], ["b"]],
        "strategies": [["0", "1", "2", "3", "4"], ["0", "1", "2", "3", "4"]],
        "payoffs": [row, col],
        "graph": "complete",
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cyclic.json");
    fs::write(&path, game.to_string()).unwrap();
    let out = run(&["mixed", path.to_str().unwrap(), "--max-iterations", "10"], dir.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn decompose_team_game() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["decompose", &f("team_path.json")], dir.path()).status.success());
    let factors = json(&dir.path().join("factors.json"));
    let factors = factors.as_array().unwrap();
    assert_eq!(factors.len(), 2);
    assert_eq!(factors[0]["coalition"], "team");
    assert_eq!(factors[0]["graph"]["edges"].as_array().unwrap().len(), 2);
}

#[test]
fn decompose_four_cycle_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["decompose", &f("four_cycle.json")], dir.path()).status.code(), Some(4));
}

#[test]
fn mcmc_build_dumps_labelled_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["mcmc-build", &f("path5.json"), &f("uniform5.json")], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 5);
    assert_eq!(lines.count(), 5);
    let summary = json(&dir.path().join("kernel.json"));
    assert_eq!(summary["case"], "SupportConnected");
    assert!(summary["p"].as_f64().unwrap() <= 0.5);
}

#[test]
fn counterexample_schedule_is_flagged_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "mcmc-run",
            &f("example_graph.json"),
            &f("example_target.json"),
            "--schedule",
            "counterexample",
            "--steps",
            "100000",
            "--seed",
            "0",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["converged"], false);
    assert!(summary["final_tv"].as_f64().unwrap() > 0.3);
}

#[test]
fn connected_support_tv_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        run(&["mcmc-run", &f("path5.json"), &f("uniform5.json"), "--steps", "1000000", "--seed", "0"], dir.path());
    assert!(out.status.success());
    let tv = fs::read_to_string(dir.path().join("tv.csv")).unwrap();
    let decades: Vec<f64> = tv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            ["100", "10000", "1000000"].contains(&t).then(|| v.parse().unwrap())
        })
        .collect();
    assert_eq!(decades.len(), 3);
    assert!(decades[0] > decades[1] && decades[1] > decades[2], "{decades:?}");
    assert_eq!(json(&dir.path().join("summary.json"))["converged"], true);
    for name in ["kernel.csv", "trace.csv", "empirical.csv", "tv.csv"] {
        assert!(dir.path().join(name).exists());
    }
}

#[test]
fn split_support_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["mcmc-run", &f("split_graph.json"), &f("split_target.json"), "--steps", "10"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("support"));
}

#[test]
fn zero_steps_is_a_usage_error() {
    let out = graphgame(&["mcmc-run", &f("path5.json"), &f("uniform5.json"), "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_schedule_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        run(&["mcmc-run", &f("path5.json"), &f("uniform5.json"), "--steps", "10", "--schedule", "fast"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["mcmc-run", &f("example_graph.json"), &f("example_target.json"), "--steps", "20000", "--seed", "9"];
    assert!(run(&args, a.path()).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_graphgame"))
        .args(args)
        .args(["--out", b.path().to_str().unwrap()])
        .env("GRAPHGAME_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    for name in ["kernel.csv", "trace.csv", "empirical.csv", "tv.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_thread_count_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_graphgame"))
        .args(["analyze", &f("isolated.json"), "--out", tempfile::tempdir().unwrap().path().to_str().unwrap()])
        .env("GRAPHGAME_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["repeated", &f("matching_pennies.json"), "--t-eval", "5000", "--replicas", "3"], dir.path());
    assert!(out.status.success());
    let report = json(&dir.path().join("report.json"));
    let coalitions = report["coalitions"].as_array().unwrap();
    assert_eq!(coalitions.len(), 2);
    assert_eq!(coalitions[0]["replicas"], 3);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "t,row,col");
    assert_eq!(trace.lines().count(), 5001);
}

fn folk(name: &str) -> (Option<i32>, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["folk-check", &f(name), "--t-eval", "200000", "--replicas", "10", "--seed", "1"], dir.path());
    (out.status.code(), json(&dir.path().join("folk_report.json")))
}

#[test]
fn folk_check_coordination_passes() {
    let (code, report) = folk("coordination.json");
    assert_eq!(report["pass"], true, "{report:#}");
    assert_eq!(code, Some(0));
}

#[test]
fn folk_check_pennies_passes() {
    let (code, report) = folk("matching_pennies.json");
    assert_eq!(report["pass"], true, "{report:#}");
    assert_eq!(code, Some(0));
    assert_eq!(report["deviations"].as_array().unwrap().len(), 10);
}

#[test]
fn folk_check_four_cycle_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["folk-check", &f("four_cycle.json")], dir.path()).status.code(), Some(4));
}
