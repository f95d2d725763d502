use std::process::{Command, Output};

use serde_json::Value;

const GEO: &str = r#"{"nu": 1, "kernel": {"type": "geometric", "a": 0.25, "r": 0.5}}"#;
const POISSON: &str = r#"{"nu": 1, "kernel": {"type": "finite", "weights": []}}"#;

fn dhawkes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhawkes"))
        .args(args)
        .env("HAWKES_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(o)).expect("valid JSON")
}

#[test]
fn rate_of_poisson_is_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poisson.json");
    std::fs::write(&path, POISSON).unwrap();
    let v = json(&dhawkes(&["rate", "--model", path.to_str().unwrap(), "--x", "2.0"]));
    let want = 2.0 * 2f64.ln() - 1.0;
    assert!((v["rate"].as_f64().unwrap() - want).abs() < 1e-14);
    assert!((v["theta_star"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-14);
}

#[test]
fn tail_query_reports_the_expansion() {
    let v = json(&dhawkes(&["tail", "--model", GEO, "--t", "600", "--x", "1.8", "--v", "2"]));
    for key in ["exponent", "prefactor", "lattice_factor", "theta_star", "coefficients", "probability", "valid", "dominance_threshold_t"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 1);
    let p = v["probability"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1e-10);
    // JSON output re-parses and re-serializes to the same value
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
}

#[test]
fn grids_produce_one_csv_row_per_point() {
    let o = dhawkes(&["pmf", "--model", GEO, "--t", "200,400", "--x", "1.5,1.8", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,x,v,exponent,prefactor,lattice_factor,theta_star,coefficients,probability,valid,dominance_threshold_t");
    assert_eq!(lines.len(), 5);
    let v = json(&dhawkes(&["pmf", "--model", GEO, "--t", "200,400", "--x", "1.5,1.8"]));
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn modphi_csv_columns() {
    let o = dhawkes(&["modphi", "--model", GEO, "--z-re", "0.1", "--t", "50,100,200"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "z_re,z_im,t,residual,phi,psi_re,psi_im");
    let residuals: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(residuals.len(), 3);
    assert!(residuals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn negative_theta_lists_are_accepted() {
    let v = json(&dhawkes(&["cgf", "--model", GEO, "--theta", "-0.5,0.1", "--order", "3"]));
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), 2);
    assert_eq!(items[0]["eval"]["eta_derivs"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_is_seeded_and_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let args = ["simulate", "--model", GEO, "--t", "50", "--paths", "500", "--seed", "3", "--stat", "mean", "--stat", "tail:1.8", "--output"];
    let run = |p: &std::path::Path| {
        let mut a = args.to_vec();
        a.push(p.to_str().unwrap());
        assert_eq!(dhawkes(&a).status.code(), Some(0));
        std::fs::read_to_string(p).unwrap()
    };
    let first = run(&out);
    let second = run(&dir.path().join("again.csv"));
    assert_eq!(first, second);
    let mut lines = first.lines();
    assert_eq!(lines.next().unwrap(), "stat,value,std_error,n_paths,seed");
    let mean: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((mean[0], mean[3], mean[4]), ("mean", "500", "3"));
    assert!((mean[1].parse::<f64>().unwrap() - 4.0 / 3.0).abs() < 0.1);
}

#[test]
fn simulate_without_seed_uses_the_default() {
    let o = dhawkes(&["simulate", "--model", GEO, "--t", "20", "--paths", "200", "--stat", "mean"]);
    let out = stdout(&o);
    assert!(out.lines().nth(1).unwrap().ends_with(",20240917"), "{out}");
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = dhawkes(&["verify", "--suite", "quick", "--seed", "7"]);
    let b = dhawkes(&["verify", "--suite", "quick", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn exit_codes() {
    // domain error
    let o = dhawkes(&["tail", "--model", GEO, "--t", "600", "--x", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    // every bad model field is listed
    let o = dhawkes(&["rate", "--model", r#"{"nu": -1, "kernel": {"type": "geometric", "a": "q", "r": 3}, "zzz": 1}"#, "--x", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for field in ["zzz", "nu", "kernel.a", "kernel.r"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }
    // usage errors name the flag
    let o = dhawkes(&["tail", "--model", GEO, "--t", "600", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    let o = dhawkes(&["simulate", "--model", GEO, "--t", "10", "--stat", "median"]);
    assert_eq!(o.status.code(), Some(64));
    let o = dhawkes(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn moderate_reports_the_disclaimer() {
    let v = json(&dhawkes(&["moderate", "--model", GEO, "--t", "10000", "--y", "2"]));
    assert!(v["disclaimer"].as_str().unwrap().contains("unquantified"));
    let p = v["probability"].as_f64().unwrap();
    let gauss = (-2.0f64).exp() / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
    assert!((p - gauss).abs() < 1e-12);
}
