//! End-to-end runs of the `ssh-jumptime` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssh-jumptime"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ssh-jumptime")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    stdout(out).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const ANALYTIC: &[&str] = &["sweep", "--method", "analytic", "--w-list", "0.5,1.5,2.0", "--ncir", "40", "--dp", "0.01"];

#[test]
fn analytic_sweep_writes_csv() {
    let out = run(ANALYTIC);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "w,T_re,T_im,n_cir,delta_p,delta_q,t_final,n_final,ancilla_dim,method");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let re: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(re[0].abs() < 0.05);
    assert!((re[1] - 1.0).abs() < 0.05 && (re[2] - 1.0).abs() < 0.05);
    assert!(rows.iter().all(|r| r[9] == "analytic"));
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_workers() {
    let args = ["sweep", "--w-list", "0.6,1.4", "--ncir", "8", "--tfinal", "20", "--nfinal", "40"];
    let a = run(&args);
    let b = bin().arg("--workers").arg("1").args(args).output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, "method = \"analytic\"\nw_grid = [0.5, 1.5]\nn_cir = 20\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--ncir", "30", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains(",30,"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_circle = 3\n").unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_grid_exits_with_usage_code() {
    let out = run(&["sweep", "--w-min", "0.5", "--w-max", "1.5", "--w-steps", "0", "--method", "analytic"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn winding_reports_topology_and_singular_point() {
    let out = run(&["winding", "--v", "1", "--w", "2"]);
    assert!(out.status.success());
    assert_eq!(json_lines(&out)[0]["value"], 1);
    let out = run(&["winding", "--v", "1", "--w", "0.5"]);
    assert_eq!(json_lines(&out)[0]["value"], 0);
    let out = run(&["winding", "--v", "1", "--w", "1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn kcc_matches_closed_form_on_a_resolved_grid() {
    let out = run(&["kcc", "--w", "2", "--p", "0.3", "--pprime", "1.1", "--tfinal", "30", "--nfinal", "300"]);
    assert!(out.status.success());
    let v = &json_lines(&out)[0];
    for i in 0..2 {
        let e = v["emulated"][i].as_f64().unwrap();
        let c = v["closed_form"][i].as_f64().unwrap();
        assert!((e - c).abs() < 1e-4);
    }
}

#[test]
fn trajectories_without_dissipation_never_jump() {
    let out = run(&["trajectories", "--model", "ssh-extended", "--gamma", "0", "--ntraj", "50", "--tfinal", "5"]);
    assert!(out.status.success());
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 51);
    assert!(lines[..50].iter().all(|l| l["jump_count"] == 0));
    let hist = lines[50]["summary"]["histogram"].as_array().unwrap();
    assert_eq!(hist[0], 50);
    assert!(hist[1..].iter().all(|h| h == 0));
}

#[test]
fn amplitude_damping_jump_fraction() {
    let n = 20_000;
    let out = run(&["trajectories", "--ntraj", &n.to_string(), "--tfinal", "1", "--seed", "4"]);
    assert!(out.status.success());
    let lines = json_lines(&out);
    let jumped = lines[..n].iter().filter(|l| l["jump_count"] == 1).count() as f64 / n as f64;
    let p = 1.0 - (-1.0f64).exp();
    assert!((jumped - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    assert!(lines[..n].iter().all(|l| l["seed"] == 4 + l["index"].as_u64().unwrap()));
}

#[test]
fn check_passes_and_underresolved_check_fails() {
    let out = run(&["check", "--ntraj", "4000"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
    let out = run(&["check", "--substeps", "1", "--ntraj", "200"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn convergence_writes_one_file_per_value_and_a_plot() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("conv.svg");
    let out = run(&[
        "convergence", "--axis", "ncir", "--values", "10,20", "--method", "analytic", "--w-list", "0.5,1.5",
        "--out", dir.path().to_str().unwrap(), "--plot", svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["10", "20"] {
        let csv = std::fs::read_to_string(dir.path().join(format!("ncir_{v}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg") && plot.contains("<polyline"));
    assert!(Path::new(&svg).exists());
}
