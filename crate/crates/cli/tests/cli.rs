use std::path::Path;
use std::process::{Command, Output};

fn nrps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrps")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_shows_every_preset() {
    let o = nrps(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("fig4a-table1a") && text.contains("Table 1 row (a)"));
    assert!(text.contains("fig6a-burst50") && text.contains("period 50, scale 400"));

    let o = nrps(&["list", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 11);
}

#[test]
fn run_check_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3");
    let o = nrps(&["run", "fig3-nrps-noiseless", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = out.join("trace-seed-1.jsonl");
    assert!(trace.exists() && out.join("summary.json").exists());

    let o = nrps(&["check", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("[PASS] csia"));

    let csv = dir.path().join("z.csv");
    let o = nrps(&["export", "--what", "z", trace.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("round,agent,series,value\n"));
    assert_eq!(text.lines().count(), 1 + 501 * 10);
}

#[test]
fn invalid_config_exits_2_and_names_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
  "name": "bad",
  "graph": { "kind": "erdos-renyi", "n": 10, "connect_prob": 0.35, "seed": 1 },
  "algorithm": "nrps",
  "beta": { "early": 0.2, "coeff": 1.0, "q": 0.5, "switch": 500 },
  "theta": { "kind": "geometric", "rho": 0.7 },
  "rounds": 0
}"#,
    )
    .unwrap();
    let o = nrps(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("q > 1"), "{err}");
    assert!(err.contains("rounds"), "{err}");
}

#[test]
fn unknown_target_and_series_exit_2() {
    assert_eq!(nrps(&["run", "no-such-preset"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(nrps(&["export", "--what", "nope", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nrps(&["export", "--what", "z", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nrps(&["check", empty.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_with_relative_graph_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ring.json"), r#"{ "n": 4, "edges": [[2,1],[3,2],[4,3],[1,4]] }"#).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
  "name": "ring",
  "graph": { "kind": "file", "path": "ring.json" },
  "algorithm": "nrps",
  "beta": { "early": 0.35, "coeff": 100.0, "q": 1.1, "switch": 200 },
  "theta": { "kind": "geometric", "rho": 0.7 },
  "rounds": 300,
  "seeds": [1, 2]
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = nrps(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(Path::new(&out.join("trace-seed-2.jsonl")).exists());
    let o = nrps(&["check", out.join("trace-seed-1.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn tampered_trace_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = nrps(&["run", "fig3-nrps-noiseless", "--rounds", "60", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let path = out.join("trace-seed-1.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut snap: serde_json::Value = serde_json::from_str(&lines[5]).unwrap();
    snap["sum_y"] = serde_json::json!(snap["sum_y"].as_f64().unwrap() + 0.5);
    lines[5] = snap.to_string();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = nrps(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("[FAIL] sum-balance"));
}

#[test]
fn failed_seed_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("neg.json");
    std::fs::write(
        &cfg,
        r#"{
  "name": "neg",
  "graph": { "kind": "erdos-renyi", "n": 10, "connect_prob": 0.35, "seed": 1 },
  "algorithm": "nrps",
  "beta": { "early": 0.2, "coeff": 1.0, "q": 1.5, "switch": 500 },
  "theta": { "kind": "geometric", "rho": 0.1 },
  "noise": { "dist": "uniform", "lo": -50.0, "hi": -40.0 },
  "rounds": 50
}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = nrps(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.join("trace-seed-1.jsonl").exists());
    assert!(stderr(&o).contains("denominator"));
}
