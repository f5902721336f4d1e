use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ahg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahg")).args(args).current_dir(dir).output().expect("ahg runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = ahg(&all, dir.path());
    let code = out.status.code().unwrap();
    let value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)));
    (code, value)
}

fn code(args: &[&str]) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = ahg(args, dir.path());
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn column(v: &Value, name: &str) -> Vec<f64> {
    v["results"].as_array().unwrap().iter().map(|r| r[name].as_f64().unwrap()).collect()
}

#[test]
fn report_on_flat_torus_is_all_zero() {
    let (status, v) = json(&["report", "t4_kahler", "--points", "5"]);
    assert_eq!(status, 0);
    for name in ["s", "s_j", "s1", "s2", "alpha2", "df2", "nabla_f2"] {
        assert!(column(&v, name).iter().all(|x| x.abs() < 1e-12), "{name}");
    }
    assert_eq!(v["config"]["command"], "report");
    assert_eq!(v["config"]["points"], 5);
    assert_eq!(v["config"]["seed"], 42);
}

#[test]
fn report_on_hopf_surface_has_constant_chern_scalar() {
    let (_, v) = json(&["report", "hopf_surface", "--points", "8"]);
    let s1 = column(&v, "s1");
    let spread = s1.iter().fold(0.0f64, |m, x| m.max((x - s1[0]).abs()));
    assert!(spread < 1e-10, "{s1:?}");
}

#[test]
fn report_on_sphere_twistor_space() {
    let (_, v) = json(&["report", "twistor:s4_round:+:t=1", "--points", "4"]);
    for s in column(&v, "s") {
        assert!((s - 12.0).abs() < 1e-9, "{s}");
    }
    assert_eq!(v["config"]["manifold"], "twistor:s4_round:+:t=1");
}

#[test]
fn json_output_is_deterministic_and_uses_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["report", "kodaira_thurston", "--points", "3", "--seed", "7", "--format", "json"];
    let a = ahg(&args, dir.path()).stdout;
    let b = ahg(&args, dir.path()).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let s = v["results"][0]["s"].as_f64().unwrap();
    assert!(text.contains(&format!("{:.16e}", s + 0.0)));
    let c = ahg(&["report", "kodaira_thurston", "--points", "3", "--seed", "8", "--format", "json"], dir.path()).stdout;
    assert_ne!(text.as_bytes(), c.as_slice());
}

#[test]
fn out_flag_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahg(&["classify", "iwasawa", "--points", "4", "--format", "csv", "--out", "c.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "class,component,sup,present");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("W3,") && lines[3].ends_with(",true"));
}

#[test]
fn verify_exit_codes() {
    let (status, v) = json(&["verify", "all", "t4_kahler", "--points", "5"]);
    assert_eq!(status, 0);
    assert_eq!(v["summary"]["pass"], true);
    let (status, v) = json(&["verify", "I2.4,I2.7", "s6_nearly_kahler", "--points", "5"]);
    assert_eq!(status, 0);
    assert_eq!(v["results"].as_array().unwrap().len(), 2);
    let (status, err) = code(&["verify", "I5.4", "s6_nearly_kahler", "--points", "5"]);
    assert_eq!(status, 2);
    assert!(err.contains("not Hermitian"), "{err}");
    assert_eq!(code(&["verify", "I9.9", "t4_kahler"]).0, 2);
    assert_eq!(code(&["verify", "twistor.lee", "t4_kahler"]).0, 2);
    assert_eq!(code(&["verify", "I2.7", "s6_nearly_kahler", "--tol=-1"]).0, 2);
}

#[test]
fn verify_all_on_twistor_chart_includes_twistor_checks() {
    let (status, v) = json(&["verify", "all", "twistor:s4_round:-:t=0.8", "--points", "3"]);
    assert_eq!(status, 0, "{v}");
    let ids: Vec<&str> = v["results"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    for id in ["I2.4", "twistor.scalars", "twistor.canonical", "twistor.nijenhuis"] {
        assert!(ids.contains(&id), "{ids:?}");
    }
    assert!(!ids.contains(&"I5.4"));
    assert_eq!(v["summary"]["skipped"], 2);
}

#[test]
fn classify_matches_declared_classes() {
    for (name, class) in [("t4_kahler", "Kahler"), ("kodaira_thurston", "W2"), ("hopf_surface", "W4"), ("s6_nearly_kahler", "W1")] {
        let (status, v) = json(&["classify", name, "--points", "6"]);
        assert_eq!(status, 0);
        assert_eq!(v["summary"]["class"], class);
        assert_eq!(v["summary"]["matches"], true);
    }
    let (_, v) = json(&["classify", "twistor:h4_hyperbolic:+:t=0.7", "--points", "4"]);
    assert_eq!(v["summary"]["class"], "W3");
    assert_eq!(v["summary"]["declared"], Value::Null);
}

#[test]
fn twistor_sweep_on_hyperbolic_base_crosses_zero_once() {
    let (status, v) = json(&["twistor-sweep", "h4_hyperbolic", "+", "0.2", "2", "50"]);
    assert_eq!(status, 0);
    assert_eq!(v["results"].as_array().unwrap().len(), 50);
    assert_eq!(v["summary"]["s_sign_changes"], 1);
    let root = v["summary"]["s_zero_t2_0"].as_f64().unwrap();
    assert!((root - (10f64.sqrt() - 3.0)).abs() < 5e-3, "{root}");
    for r in column(&v, "residual") {
        assert!(r <= 1e-6);
    }
}

#[test]
fn twistor_sweep_spot_values() {
    let (_, v) = json(&["twistor-sweep", "t4_flat_base", "-", "0.5", "2", "4"]);
    assert!(column(&v, "s1_generic").iter().all(|x| x.abs() < 1e-10));
    let (_, v) = json(&["twistor-sweep", "s4_round", "+", "0.5", "1.5", "3"]);
    let t = column(&v, "t");
    let s1 = column(&v, "s1_generic");
    assert_eq!(t[1], 1.0);
    assert!((s1[1] - 6.0).abs() < 1e-9);
    assert_eq!(code(&["twistor-sweep", "s4_round", "+", "0", "1", "3"]).0, 2);
    assert_eq!(code(&["twistor-sweep", "s4_round", "+", "2", "1", "3"]).0, 2);
    assert_eq!(code(&["twistor-sweep", "s4_round", "*", "1", "2", "3"]).0, 2);
    assert_eq!(code(&["twistor-sweep", "s6_nearly_kahler", "+", "1", "2", "3"]).0, 2);
}

#[test]
fn solve_gate_and_flat_solution() {
    let (status, err) = code(&["solve", "t4_perturbed", "1", "-2", "16"]);
    assert_eq!(status, 2);
    assert!(err.contains("same sign for every metric in the conformal class"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let out = ahg(&["solve", "t4_kahler", "1", "0", "8", "--points", "4", "--format", "json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["summary"]["f_sup"].as_f64().unwrap() < 1e-12);
    assert!(v["summary"]["gamma"].as_f64().unwrap().abs() < 1e-12);
    let grid = v["summary"]["grid"].as_str().unwrap();
    assert!(dir.path().join(grid).exists());
    assert_eq!(code(&["solve", "hopf_surface", "1", "0", "8"]).0, 2);
}

#[test]
fn gauduchon_and_gamma() {
    let (status, v) = json(&["gauduchon", "t4_perturbed", "--modes", "1"]);
    assert_eq!(status, 0);
    assert_eq!(v["summary"]["converged"], true);
    assert!(v["summary"]["residual"].as_f64().unwrap() <= 1e-10);
    let (status, v) = json(&["gauduchon", "t4_perturbed", "--modes", "1", "--tol", "1e-30"]);
    assert_eq!(status, 1);
    assert_eq!(v["summary"]["converged"], false);
    let (status, v) = json(&["gamma", "hopf_surface", "1", "1", "--nodes", "6"]);
    assert_eq!(status, 0);
    assert_eq!(v["summary"]["sign"], "positive");
    assert_eq!(code(&["gamma", "s4_round", "1", "1"]).0, 2);
}

#[test]
fn berger_average_within_three_sigma() {
    let (status, v) = json(&["berger", "hopf_surface", "--points", "2", "--samples", "20000"]);
    assert_eq!(status, 0);
    assert!(v["results"].as_array().unwrap().iter().all(|r| r["within"] == true));
    assert_eq!(code(&["berger", "hopf_surface", "--samples", "1"]).0, 2);
}

#[test]
fn custom_file_manifold() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[meta]\nn = 1\nname = warped\n[domain]\n0 2*pi periodic\n0 2*pi periodic\n\
                [metric]\nexp(0.2*sin(x1)), 0\n0, exp(0.2*sin(x1))\n[J]\n0, -1\n1, 0\n";
    std::fs::write(dir.path().join("c.ahg"), text).unwrap();
    let out = ahg(&["report", "file:c.ahg", "--points", "2", "--format", "json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["manifold"], "file:c.ahg");
    let (status, v) = {
        let out = ahg(&["verify", "all", "file:c.ahg", "--points", "3", "--format", "json"], dir.path());
        (out.status.code().unwrap(), serde_json::from_slice::<Value>(&out.stdout).unwrap())
    };
    assert_eq!(status, 0, "{v}");
    assert_eq!(code(&["report", "file:missing.ahg"]).0, 2);
    let bare = text.split("[J]").next().unwrap();
    std::fs::write(dir.path().join("bare.ahg"), bare).unwrap();
    let (status, err) = {
        let out = ahg(&["report", "file:bare.ahg"], dir.path());
        (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
    };
    assert_eq!(status, 2, "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&["report", "nowhere"]).0, 2);
    assert_eq!(code(&["report", "t4_kahler", "--format", "xml"]).0, 2);
    assert_eq!(code(&["report", "twistor:s4_round:+:t=-1"]).0, 2);
    assert_eq!(code(&["frobnicate"]).0, 2);
    assert_eq!(code(&[]).0, 2);
}
