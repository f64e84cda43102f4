use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn cdare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn c(re: f64) -> Value {
    json!([re, 0.0])
}

/// Scalar plus problem with g = 1, a = 1/sqrt(2) and exact solution
/// sqrt(2) - 1, so that the closed-loop factor is 1/4.
fn scalar_problem() -> Value {
    let a = 0.5f64.sqrt();
    let x = 2f64.sqrt() - 1.0;
    let h = x - a * a * x / (1.0 + x);
    json!({"n": 1, "sign": "plus", "A": [[c(a)]], "G": [[c(1.0)]], "H": [[c(h)]]})
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &scalar_problem());
    let report = dir.path().join("report.json");
    let o = cdare(&["solve", "--input", s(&input), "--output", s(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["converged"], true);
    let x = rep["x_pos"][0][0][0].as_f64().unwrap();
    assert!((x - (2f64.sqrt() - 1.0)).abs() < 1e-14);

    let o = cdare(&["verify", "--input", s(&input), "--solution", s(&report)]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["accepted"], true);
    assert_eq!(v["positive_definite"], true);
}

#[test]
fn every_method_solves_the_scalar_case() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &scalar_problem());
    for (m, it) in [
        ("fp", 26),
        ("sda", 4),
        ("accel:2", 4),
        ("accel:3", 3),
        ("accel:5", 2),
    ] {
        let o = cdare(&["solve", "--input", s(&input), "--method", m]);
        assert_eq!(code(&o), 0, "{m}");
        let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(rep["iterations"], it, "{m}");
    }
}

#[test]
fn zero_candidate_is_rejected_by_verify() {
    let dir = TempDir::new().unwrap();
    let mut p = scalar_problem();
    let h = p["H"][0][0][0].as_f64().unwrap();
    p["X"] = json!([[c(0.0)]]);
    let input = write(&dir, "p.json", &p);
    let o = cdare(&["verify", "--input", s(&input)]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["res"].as_f64().unwrap() - h).abs() < 1e-15);
    assert_eq!(v["accepted"], false);
}

#[test]
fn missing_field_is_named_in_the_error() {
    let dir = TempDir::new().unwrap();
    let mut p = scalar_problem();
    p.as_object_mut().unwrap().remove("G");
    let input = write(&dir, "p.json", &p);
    let o = cdare(&["solve", "--input", s(&input)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`G`"));
}

#[test]
fn indefinite_h_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let mut p = scalar_problem();
    p["H"] = json!([[c(-1.0)]]);
    let input = write(&dir, "p.json", &p);
    let o = cdare(&["solve", "--input", s(&input)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H"));
}

#[test]
fn shape_mismatch_names_the_field() {
    let dir = TempDir::new().unwrap();
    let mut p = scalar_problem();
    p["A"] = json!([[c(0.1), c(0.0)], [c(0.0), c(0.1)]]);
    let input = write(&dir, "p.json", &p);
    let o = cdare(&["solve", "--input", s(&input)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`A`"));
}

#[test]
fn iteration_budget_exhaustion_exits_two() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &scalar_problem());
    let o = cdare(&[
        "solve",
        "--input",
        s(&input),
        "--method",
        "fp",
        "--max-iter",
        "3",
    ]);
    assert_eq!(code(&o), 2);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["converged"], false);
}

#[test]
fn bench_rejects_zero_trials() {
    let o = cdare(&["bench", "--n", "3", "--trials", "0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let rec1 = dir.path().join("r1.csv");
    let rec2 = dir.path().join("r2.csv");
    let args = |rec: &Path| {
        vec![
            "--format".to_string(),
            "csv".into(),
            "bench".into(),
            "--n".into(),
            "4".into(),
            "--trials".into(),
            "6".into(),
            "--seed".into(),
            "17".into(),
            "--method".into(),
            "fp,sda".into(),
            "--parallel".into(),
            "--records".into(),
            s(rec).to_string(),
        ]
    };
    let run = |rec: &Path| {
        let a = args(rec);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        cdare(&refs)
    };
    let o1 = run(&rec1);
    let o2 = run(&rec2);
    assert_eq!(code(&o1), 0, "{}", String::from_utf8_lossy(&o1.stderr));
    assert_eq!(o1.stdout, o2.stdout);
    let r1 = fs::read_to_string(&rec1).unwrap();
    assert_eq!(r1, fs::read_to_string(&rec2).unwrap());
    let mut lines = r1.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,trial,n,rho_T1,iterations,predicted,res,nres,time_s,converged"
    );
    assert_eq!(lines.count(), 12);
    let table = String::from_utf8(o1.stdout).unwrap();
    assert!(table.starts_with("method,trials,min_it,max_it,ave_it,the_it,ave_time,failures\n"));
    assert!(table.contains("\nfp,6,"));
    assert!(table.contains("\nr=2,6,"));
}

#[test]
fn scalar_bench_reproduces_small_table() {
    let o = cdare(&[
        "--format", "csv", "bench", "--scalar", "--method", "accel:2",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let its: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().to_string())
        .collect();
    assert_eq!(its, ["4", "5", "6", "17"]);
}

#[test]
fn stein_solves_scalar_equation() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.json", &json!({"A": [[c(0.5)]], "Q": [[c(1.0)]]}));
    let o = cdare(&["stein", "--input", s(&input)]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["X"][0][0][0].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-14);
}

#[test]
fn stein_rejects_large_spectral_radius() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.json", &json!({"A": [[c(1.5)]], "Q": [[c(1.0)]]}));
    assert_eq!(code(&cdare(&["stein", "--input", s(&input)])), 1);
}

#[test]
fn diag_reports_closed_loop_radius() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &scalar_problem());
    let o = cdare(&["diag", "--input", s(&input)]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["solvability"]["plus_ok"], true);
    let rho = v["diagnostics"]["rho_t1"].as_f64().unwrap();
    assert!((rho - 0.25).abs() < 1e-12);
}

#[test]
fn minus_sign_override_is_applied() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", &scalar_problem());
    let o = cdare(&["solve", "--input", s(&input), "--sign", "minus"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    let x = rep["x_pos"][0][0][0].as_f64().unwrap();
    assert!(x > 0.0 && x < scalar_problem()["H"][0][0][0].as_f64().unwrap());
}
