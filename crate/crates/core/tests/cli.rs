use std::path::Path;
use std::process::{Command, Output};

fn lbkde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbkde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn write_sample(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn model_sample(dir: &Path) -> String {
    let path = dir.join("sample.txt");
    let p = path.to_str().unwrap();
    let out = lbkde(&["sample", "--model", "1", "-n", "80", "--seed", "3", "--out", p]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    p.to_owned()
}

#[test]
fn select_prints_one_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let input = model_sample(dir.path());
    let out = lbkde(&["select", "--method", "rt", "--input", &input]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let h: f64 = lines[0].parse().unwrap();
    assert!(h > 0.0 && h.is_finite());
    assert!(text(&out.stderr).contains("method=RT"));
}

#[test]
fn estimate_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = model_sample(dir.path());
    let out = lbkde(&["estimate", "--input", &input, "--h", "0.1", "--grid", "512"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let mut rows = stdout.lines();
    assert_eq!(rows.next(), Some("y,fhat"));
    let pts: Vec<(f64, f64)> = rows
        .map(|l| {
            let (y, f) = l.split_once(',').unwrap();
            (y.parse().unwrap(), f.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 512);
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--models", "1", "--sizes", "100", "--reps", "10", "--seed", "1"];
    let a = lbkde(&args);
    let b = lbkde(&args);
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn nonpositive_value_is_rejected_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "bad.txt", "0.5\n1.2\n-0.3\n0.8\n");
    let out = lbkde(&["select", "--method", "rt", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn simulate_requires_seed() {
    let out = lbkde(&["simulate", "--models", "1", "--sizes", "50", "--reps", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("error=usage"));
}

#[test]
fn unknown_method_is_a_usage_error() {
    let out = lbkde(&["select", "--method", "magic", "--input", "x.txt"]);
    assert_eq!(out.status.code(), Some(1));
}
