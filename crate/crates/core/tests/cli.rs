//! Runs the `relucx` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use relucx::ReluNetwork;

const HAND: &str = r#"{"architecture":[2,2,1],"layers":[
  {"weights":[[1,0],[0,1]],"bias":[0,0]},
  {"weights":[[1,1]],"bias":[-1]}]}"#;

// Output is relu(x) + relu(y) + 1 > 0 everywhere.
const POSITIVE: &str = r#"{"architecture":[2,2,1],"layers":[
  {"weights":[[1,0],[0,1]],"bias":[0,0]},
  {"weights":[[1,1]],"bias":[1]}]}"#;

fn relucx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relucx")).args(args).env_remove("RELUCX_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn build_hand_model() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "hand.json", HAND);
    let out = tmp.path().join("out");
    let o = relucx(&["build", "--model", &model, "--out", out.to_str().unwrap(), "--svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "betti.json").trim(), r#"{"betti":[1,1],"bounded":0,"unbounded":1}"#);
    assert_eq!(read(&out, "vertices.jsonl").lines().count(), 3);
    let cells: Vec<String> = read(&out, "complex.jsonl").lines().map(String::from).collect();
    assert_eq!(cells.len(), 19);
    let mut sorted = cells.clone();
    sorted.sort_by_key(|l| {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        v["signs"].as_str().unwrap().parse::<relucx::SignSequence>().unwrap()
    });
    assert_eq!(cells, sorted);
    assert!(read(&out, "db.svg").starts_with("<svg"));
}

#[test]
fn build_empty_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "pos.json", POSITIVE);
    let out = tmp.path().join("out");
    let o = relucx(&["build", "--model", &model, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&out, "betti.json").trim(), r#"{"betti":[1,0],"bounded":0,"unbounded":0}"#);
}

#[test]
fn build_error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let bad = write(
        tmp.path(),
        "bad.json",
        r#"{"architecture":[2,2,1],"layers":[{"weights":[[1,0],[0,1]],"bias":[0]},{"weights":[[1,1]],"bias":[-1]}]}"#,
    );
    let o = relucx(&["build", "--model", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("layers[0].bias"));

    let o = relucx(&["build", "--model", &write(tmp.path(), "trunc.json", "{\"architecture\": [2,"), "--out", out]);
    assert_eq!(o.status.code(), Some(1));

    let o = relucx(&["build", "--model", "/nonexistent/model.json", "--out", out]);
    assert_eq!(o.status.code(), Some(1));

    let parallel = write(
        tmp.path(),
        "par.json",
        r#"{"architecture":[2,2,1],"layers":[{"weights":[[1,0],[2,0]],"bias":[0,1]},{"weights":[[1,1]],"bias":[-1]}]}"#,
    );
    let o = relucx(&["build", "--model", &parallel, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(diag["error"], "degenerate_network");
    assert!(Path::new(out).join("diagnostic.json").exists());

    let narrow = write(
        tmp.path(),
        "narrow.json",
        r#"{"architecture":[3,2,1],"layers":[{"weights":[[1,0,0],[0,1,0]],"bias":[0,0]},{"weights":[[1,1]],"bias":[-1]}]}"#,
    );
    assert_eq!(relucx(&["build", "--model", &narrow, "--out", out]).status.code(), Some(3));
}

#[test]
fn oracle_check_and_fault_injection() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "hand.json", HAND);
    let o = relucx(&["oracle-check", "--model", &model, "--box", "-5,5", "--resolution", "300"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["regions_builder"], 7);
    assert_eq!(report["regions_sampled"], 7);
    assert_eq!(report["counts_ok"], true);

    let out = tmp.path().join("out");
    assert_eq!(relucx(&["build", "--model", &model, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let kept: Vec<String> =
        read(&out, "complex.jsonl").lines().filter(|l| !l.contains("\"(1,1,1)\"")).map(String::from).collect();
    assert_eq!(kept.len(), 18);
    let damaged = write(tmp.path(), "damaged.jsonl", &(kept.join("\n") + "\n"));
    let o = relucx(&["oracle-check", "--model", &model, "--complex", &damaged, "--box=-5,5", "--resolution", "300"]);
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["missing"], serde_json::json!(["(1,1,1)"]));
}

#[test]
fn oracle_check_deep_random_model() {
    let tmp = tempfile::tempdir().unwrap();
    let net = ReluNetwork::random_init(&[2, 5, 5, 1], 3).unwrap();
    let model = tmp.path().join("deep.json");
    net.save(&model).unwrap();
    let o = relucx(&["oracle-check", "--model", model.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn experiment_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = |dir: &Path, threads: &str| -> Output {
        relucx(&[
            "experiment",
            "--arch",
            "2,5,1",
            "--trials",
            "8",
            "--seed",
            "5",
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ])
    };
    assert_eq!(args(&a, "1").status.code(), Some(0));
    assert_eq!(args(&b, "3").status.code(), Some(0));
    let csv = read(&a, "stats.csv");
    assert_eq!(csv, read(&b, "stats.csv"));
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().nth(1).unwrap().starts_with("summary,\"(2,5,1)\",,5,8,"));

    let single = tmp.path().join("single");
    let o = relucx(&["experiment", "--arch", "2,5,1", "--trials", "1", "--out", single.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("single trial"));
    let summary = read(&single, "stats.csv").lines().nth(1).unwrap().to_string();
    assert!(summary.ends_with(",0.000000,false"), "{summary}");

    let o = relucx(&["experiment", "--arch", "3,2,1", "--out", single.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_relucx"))
        .args(["experiment", "--arch", "2,5,1", "--trials", "4", "--out", out.to_str().unwrap()])
        .env("RELUCX_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(relucx::cli::thread_count(Some(3)), Some(3));
}
