use std::process::{Command, Output};

use bellpv::cli::format_behavior;
use bellpv::quantum::{ideal_behavior, BlochVector, MeasurementFrame, PureState};

fn bellpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellpv")).args(args).env_remove("BELLPV_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(csv: &str, column: &str) -> String {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == column).unwrap()].to_string()
}

#[test]
fn estimate_writes_one_csv_row() {
    let o = bellpv(&["estimate", "--state", "singlet", "--settings", "2", "--model", "binning", "--eta", "1.0", "--samples", "3000", "--seed", "7"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("# bellpv estimate "));
    let p: f64 = field(&s, "p_hat").parse().unwrap();
    assert!((0.25..0.32).contains(&p), "{p}");
    assert_eq!(field(&s, "seed"), "7");
}

#[test]
fn below_threshold_estimate_is_zero() {
    let o = bellpv(&["estimate", "--eta", "0.80", "--samples", "2000"]);
    assert_eq!(field(&stdout(&o), "k"), "0");
}

#[test]
fn header_round_trips() {
    let first = bellpv(&["sweep", "--eta-grid", "0.9:1:0.05", "--samples", "300", "--seed", "3"]);
    let s = stdout(&first);
    let echo = s.lines().next().unwrap().trim_start_matches("# bellpv ").to_string();
    let args: Vec<&str> = echo.split(' ').collect();
    let again = bellpv(&args);
    assert_eq!(stdout(&again), s);
}

#[test]
fn workers_do_not_change_output() {
    let base = ["estimate", "--state", "ghz3", "--model", "three-outcome", "--eta", "0.95", "--samples", "200", "--seed", "11"];
    let a = bellpv(&[&base[..], &["--workers", "1"]].concat());
    let b = bellpv(&[&base[..], &["--workers", "3"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_output_parses() {
    let o = bellpv(&["estimate", "--samples", "100", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "estimate");
    assert_eq!(v["result"][0]["n"], 100);
    assert!(v["echo"].as_str().unwrap().contains("--seed 1"));
}

#[test]
fn bound_and_ineq_examples() {
    let o = bellpv(&["bound", "--method", "closed", "--eta-asym", "1,0.70"]);
    assert_eq!(field(&stdout(&o), "value"), "0");
    let o = bellpv(&["ineq", "--name", "iabc1", "--report-critical"]);
    let s = stdout(&o);
    assert!(s.contains("iabc1,eta_critical,0.720759"), "{s}");
    let o = bellpv(&["ineq", "--name", "mermin-cg", "--report-critical"]);
    assert!(stdout(&o).contains("mermin-cg,eta_critical,0.75"));
}

#[test]
fn exit_codes() {
    let o = bellpv(&["estimate", "--state", "qutrit"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--state"));
    let o = bellpv(&["sweep", "--eta-grid", "0.2:0.1:0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--eta-grid"));
    let o = bellpv(&["critical", "--state", "product2", "--frames", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bellpv(&["certify", "/nonexistent/behavior.txt"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn workers_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_bellpv"))
        .args(["estimate", "--samples", "50"])
        .env("BELLPV_WORKERS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_extracts_a_functional() {
    let dir = tempfile::tempdir().unwrap();
    let a = vec![BlochVector::z(), BlochVector::x()];
    let f = std::f64::consts::FRAC_PI_4;
    let b = vec![BlochVector::from_angles(f, 0.0), BlochVector::from_angles(-f, 0.0)];
    let frame = MeasurementFrame::new(vec![a, b]).unwrap();
    let behavior = ideal_behavior(&PureState::singlet(), &frame).unwrap();
    let path = dir.path().join("chsh.txt");
    std::fs::write(&path, format_behavior(&behavior)).unwrap();
    let lp = dir.path().join("chsh.lp");
    let o = bellpv(&["certify", path.to_str().unwrap(), "--format", "json", "--dump-lp", lp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["verdict"], "nonlocal");
    let bound = v["result"]["functional"]["local_bound"].as_f64().unwrap();
    assert!(v["result"]["value"].as_f64().unwrap() > bound);
    assert!(std::fs::read_to_string(&lp).unwrap().contains("Subject To"));

    let uniform = dir.path().join("uniform.txt");
    std::fs::write(&uniform, "2 2 2 2\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n").unwrap();
    let o = bellpv(&["certify", uniform.to_str().unwrap()]);
    assert!(stdout(&o).contains("# verdict local"));
}
