use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gscs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gscs")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const NO_INFECTION: &str = r#"{"alpha":0.5,"beta":0,"gamma":2,"delta":1,
    "x":[1,0.5,0.2,1,1,1],"y":[0.5,0.5,0.5,1,1,1],"z":{"kind":"uniform","budget":3},"graph":"G6"}"#;

const STAR: &str = r#"{"alpha":0.05,"beta":0.01,"gamma":1,"delta":1,
    "x":{"kind":"uniform","budget":1},"y":{"kind":"degree_first","budget":0.5},
    "z":{"kind":"degree_last","budget":0.5},"graph":"G1"}"#;

#[test]
fn equilibrium_without_infection_is_the_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", NO_INFECTION);
    let out = gscs(&["equilibrium", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c: Vec<f64> = serde_json::from_value(v["c_star"].clone()).unwrap();
    let lower: Vec<f64> = serde_json::from_value(v["lower"].clone()).unwrap();
    assert_eq!(c, lower);
    let mean = lower.iter().sum::<f64>() / 6.0;
    assert!((v["limit_security"].as_f64().unwrap() - (1.0 - mean)).abs() < 1e-15);
    // a = 0.5, x = 1, g d y z = 2 * 0.5 * 0.5
    assert_eq!(c[0], 0.5 / (0.5 + 0.5));
}

#[test]
fn equilibrium_csv_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", STAR);
    let out = gscs(&["equilibrium", "--config", &cfg, "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("S_L,C_mean,iters,residual,rhs_residual,within_bounds,C_1"));
    assert_eq!(lines[1].split(',').count(), 12);
    let out = gscs(&["equilibrium", "--config", &cfg, "--seed", "5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["uniqueness"]["starts"], 10);
    assert!(v["uniqueness"]["max_spread"].as_f64().unwrap() < 1e-8);
}

#[test]
fn catalog_lists_six_trees() {
    let out = gscs(&["catalog"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 6);
    assert_eq!(list[0]["name"], "G1");
    assert_eq!(list[0]["degrees"], serde_json::json!([5, 1, 1, 1, 1, 1]));
    assert_eq!(list[5]["degrees"], serde_json::json!([2, 2, 2, 2, 1, 1]));
    for tree in list {
        assert_eq!(tree["edges"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn default_rpr_sweep_has_504_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"experiment":"rpr_sweep"}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(gscs(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_gscs"))
        .args(["sweep", "--config", &cfg, "--out", b.to_str().unwrap()])
        .env("GSCS_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "experiment,graph,x_scheme,y_scheme,z_scheme,r,s,S_L,C_mean,iters,residual,error");
    assert_eq!(lines.count(), 504);
}

#[test]
fn simulate_writes_trajectory_with_lyapunov_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", &STAR.replace("\"graph\":\"G1\"", "\"graph\":\"G1\",\"c0\":[1,1,1,0,0,0]"));
    let out = gscs(&["simulate", "--config", &cfg, "--t-end", "10", "--dt", "0.1", "--thin", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,C_1,C_2,C_3,C_4,C_5,C_6,C_mean,V");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("0,1.0000000000000000e0,"));
    let again = gscs(&["simulate", "--config", &cfg, "--t-end", "10", "--dt", "0.1", "--thin", "10"]);
    assert_eq!(text.as_bytes(), &again.stdout[..]);
}

#[test]
fn sensitivity_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", &STAR.replace("\"graph\":\"G1\"", "\"graph\":\"G1\",\"parameters\":[\"gamma\",\"a_2_3\"]"));
    let out = gscs(&["sensitivity", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,node,dCstar,dSL,fd_rel_err,sign_ok");
    assert_eq!(lines.len(), 13);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5], "true");
        assert!(cols[4].parse::<f64>().unwrap() <= 1e-4);
    }
    assert!(lines[1].starts_with("gamma,1,-"));
    assert!(lines[7].starts_with("a_2_3,1,"));
}

#[test]
fn domain_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"alpha":1,"beta":1,"gamma":1,"delta":1,"x":[1,1,1],"y":[1,1,1],"z":[1,1,1],
            "graph":{"n":3,"edges":[[1,2],[2,3]]}}"#,
    );
    let out = gscs(&["equilibrium", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NotStronglyConnected");

    let cfg = write(dir.path(), "q.json", STAR);
    let out = gscs(&["equilibrium", "--config", &cfg, "--max-iter", "2", "--tol", "1e-15"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NoConvergence");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gscs(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gscs(&["equilibrium"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\"alpha\": ");
    assert_eq!(gscs(&["equilibrium", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "s.json", r#"{"experiment":"rpr_sweep","bogus":1}"#);
    assert_eq!(gscs(&["sweep", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(gscs(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_f_reports() {
    let out = gscs(&["validate-f"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
}
