use std::path::Path;
use std::process::{Command, Output};

fn flowlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn help_lists_every_subcommand() {
    let o = flowlab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for sub in ["beta0", "rates", "bounds", "cover", "simulate", "verify", "attract", "expand", "chain-check", "schedule"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(flowlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(flowlab(&["beta0", "--lambda", "1"]).status.code(), Some(2));
    assert_eq!(flowlab(&["bounds", "nope"]).status.code(), Some(2));
    assert_eq!(flowlab(&["verify", "gaussian", "--replicas", "10"]).status.code(), Some(2));
    assert_eq!(flowlab(&["verify", "gaussian", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn beta0_prints_closed_form_values() {
    let o = flowlab(&["beta0", "--lambda", "1", "--sigma-l", "1", "--sigma-b", "1", "--d", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("beta0 = 2.73205081"), "{text}");
    assert!(text.contains("Gamma0 = 3.73205081"), "{text}");
}

#[test]
fn bounds_emit_json() {
    let o = flowlab(&["bounds", "two_point_tail", "--params", "separation=1,u=2.718281828459045,T=1,sigma_L=1,lambda=0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["exact"].as_f64().unwrap() - 0.317310508).abs() < 1e-8);
    assert!((v["bound"]["capped"].as_f64().unwrap() - (-0.5f64).exp()).abs() < 1e-8);
}

#[test]
fn chain_check_passes() {
    let o = flowlab(&["chain-check"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("false"));
}

#[test]
fn rate_hypothesis_violation_is_a_usage_error() {
    let ok = flowlab(&["rates", "--lambda", "1", "--sigma-l", "1", "--sigma-b", "1", "--d", "2", "--beta", "4", "--gamma", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = flowlab(&["rates", "--lambda", "1", "--sigma-l", "1", "--sigma-b", "1", "--d", "2", "--beta", "2", "--gamma", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn cover_writes_csv() {
    let o = flowlab(&["cover", "--d", "2", "--S", "1", "--xi", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 8, "{text}");
}

#[test]
fn simulate_writes_a_trajectory() {
    let o = flowlab(&["simulate", "--points", "1,0;0,1", "--T", "0.1", "--h", "0.01", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().count() > 10);
    let again = flowlab(&["simulate", "--points", "1,0;0,1", "--T", "0.1", "--h", "0.01", "--seed", "4"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn verify_writes_artifacts_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = flowlab(&["verify", "one-point", "--config", &config("escape.json"), "--replicas", "300", "--S", "25", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "summary.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let cfg = &report["runs"][0]["config"];
    assert_eq!(cfg["replicas"], 300);
    assert_eq!(cfg["radii"]["S"], 25.0);
    assert_eq!(cfg["radii"]["R"], 10.0);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("experiment,model,seed,n,h,estimate,se,bound,verdict"));
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(!text.contains("started"));
}

#[test]
fn report_is_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = flowlab(&[
            "verify",
            "two-point",
            "--replicas",
            "500",
            "--threads",
            threads,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.code().is_some_and(|c| c <= 1));
    }
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}
