use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmplan")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn graph_certify_two_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("w.csv");
    std::fs::write(&m, "0, 0.5\n0.5, 0\n").unwrap();
    let v = json(&run(&["graph", "certify", "--matrix", path_str(&m)]));
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["c"].as_f64(), Some(0.5));
    assert_eq!(v["pass"], true);
}

#[test]
fn plan_orders_budget() {
    let v = json(&run(&["plan", "--regime", "QO", "--n", "20", "--p", "2", "--rho", "conjectured"]));
    let b = &v["budget"];
    let h: Vec<f64> = ["h_k", "h_v", "h_i", "h_p"].iter().map(|k| b[*k].as_f64().unwrap()).collect();
    assert!(h[0] < h[1] && h[1] < h[2] && h[2] < h[3], "{h:?}");
}

#[test]
fn plan_is_idempotent() {
    let args = ["plan", "--regime", "U2", "--k", "30", "--rho", "2.0"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn config_errors_exit_with_two() {
    let out = run(&["experiment", "run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    std::fs::write(&c, r#"{"sweep": {"regimes": ["U1"], "ns": [3], "sources": ["in"]}, "colour": "red"}"#).unwrap();
    assert_eq!(run(&["experiment", "run", "--config", path_str(&c)]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("w.csv");
    std::fs::write(&m, "0, 2\n2, 0\n").unwrap();
    // A loop sum above one is reported, not an error.
    let v = json(&run(&["graph", "certify", "--matrix", path_str(&m)]));
    assert_eq!(v["pass"], false);
    assert_eq!(run(&["plan", "--regime", "U1", "--k", "5", "--c=-1"]).status.code(), Some(1));
    assert_eq!(run(&["plan", "--regime", "U1", "--k=-3"]).status.code(), Some(2));
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["trace", "plan", "graph", "mesh", "solve", "experiment", "report"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn mesh_writes_a_readable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.txt");
    let v = json(&run(&["mesh", "--regime", "U1", "--c", "50", "--n", "4", "--out", path_str(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    let mesh = helmplan::fem::Mesh::from_text(&text).unwrap();
    assert_eq!(v["triangles"].as_u64(), Some(mesh.triangles.len() as u64));
}

#[test]
fn experiment_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"sweep": {"regimes": ["U1"], "ns": [2, 3, 4], "sources": ["in"], "c_qo": 100}, "seed": 7}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let v = json(&run(&["experiment", "run", "--config", path_str(&config), "--out", path_str(out)]));
        assert_eq!(v["summary"]["criteria"].as_array().unwrap().len(), 9);
    }
    for file in ["U1.csv", "U1_in_qo.svg", "summary.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let c = dir.path().join("c");
    json(&run(&["report", "--input", path_str(&a.join("sweep.json")), "--out", path_str(&c)]));
    assert_eq!(std::fs::read(a.join("U1.csv")).unwrap(), std::fs::read(c.join("U1.csv")).unwrap());
}
