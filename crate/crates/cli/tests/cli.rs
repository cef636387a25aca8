use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reslab"))
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn lemma_comp_suite_reports_grid_and_fails_on_half_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(&["verify", "--suite", "lemma-comp", "-o", dir.path().to_str().unwrap()]);
    // the computed integral is half the published closed form, so the check fails
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("verify_lemma-comp.json"));
    assert_eq!(rep["check_id"], "criterion-1/lemma-comp");
    let grid = rep["data"]["grid"].as_array().unwrap();
    let nus: Vec<f64> = grid.iter().map(|g| g["nu"].as_f64().unwrap()).collect();
    assert_eq!(nus, vec![1.1, 1.25, 1.5, 2.0, 3.0]);
    for g in grid {
        assert!((g["ratio"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    }
    assert!(fs::read_to_string(dir.path().join("verify_summary.csv")).unwrap().starts_with("check_id,check,"));
}

#[test]
fn bessel_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(&["verify", "--suite", "bessel", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS criterion-2/bessel"));
}

#[test]
fn zero_modes_on_planted_problem() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("planted_n5_l1.txt");
    let out = exec(&["zero-modes", "--problem", p.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("zero_modes.json"));
    assert_eq!(rep["data"]["report"]["m"].as_f64(), Some(1.0));
    assert_eq!(rep["data"]["report"]["kernel_dimension"].as_u64(), Some(5));
    assert_eq!(rep["pass"], Value::Bool(true));
}

#[test]
fn expand_free_problem_finds_no_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("free_n3.txt");
    let out = exec(&["expand", "--problem", p.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = json(&dir.path().join("expand.json"));
    assert!(rep["title"].as_str().unwrap().contains("no kernel"));
    let checks = rep["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["pass"] == Value::Bool(true)));
    assert!(dir.path().join("expand_samples.csv").exists() && dir.path().join("expand_fit.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let p = problem("planted_n5_l1.txt");
    let mut texts = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = exec(&["expand", "--problem", p.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--seed", "3", "--set", "directions=2"]);
        assert!(out.status.success());
        texts.push((fs::read(dir.path().join("expand.json")).unwrap(), fs::read(dir.path().join("expand_fit.csv")).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn seed_changes_sample_directions() {
    let p = problem("free_n3.txt");
    let mut cos = Vec::new();
    for seed in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let out = exec(&["expand", "--problem", p.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--seed", seed, "--set", "directions=1"]);
        assert!(out.status.success());
        cos.push(json(&dir.path().join("expand.json"))["data"]["fits"][0]["cos_theta"].as_f64().unwrap());
    }
    assert_ne!(cos[0], cos[1]);
}

#[test]
fn run_file_with_overrides_logs_them() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    let p = problem("planted_n5_l1.txt");
    fs::write(
        &conf,
        format!("command = solve\nproblem = {}\noutput = {}\ntol.solve.wronskian = 1e-6\nk = 0.3\n", p.display(), dir.path().display()),
    )
    .unwrap();
    let out = exec(&["run", conf.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("solve.json"));
    assert_eq!(rep["tolerance_overrides"]["solve.wronskian"].as_f64(), Some(1e-6));
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["tolerance"].as_f64() == Some(1e-6)));
    assert!(rep["data"]["kernel"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_run_file_is_rejected_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "command = solve\nfoo = 1\n").unwrap();
    let out = exec(&["run", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("foo"), "{err}");
    let out = exec(&["verify", "--suite", "bessel", "--tol", "bessel.slope=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_problem_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(&["solve", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = exec(&["solve", "--problem", "/nonexistent/problem.txt", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn specfun_and_cone_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = exec(&["specfun", "-o", d, "--set", "nu=0.5,2", "--set", "z=0.1,5"]);
    assert!(out.status.success());
    let rep = json(&dir.path().join("specfun.json"));
    // K_{1/2}(z) = √(π/2z) e^{−z}
    let k = rep["data"]["values"][1]["K"]["value"].as_f64().unwrap();
    assert!((k - (std::f64::consts::PI / 10.0).sqrt() * (-5f64).exp()).abs() < 1e-14);
    assert_eq!(rep["data"]["comp"][0]["nu"].as_f64(), Some(2.0));
    let out = exec(&["cone-kernel", "-o", d, "--set", "k=2", "--set", "cos_theta=-0.4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let p = problem("conic_resonance.txt");
    let out = exec(&["cone-kernel", "--problem", p.to_str().unwrap(), "-o", d]);
    assert!(out.status.success());
    assert!(json(&dir.path().join("cone_kernel.json"))["checks"].as_array().unwrap().is_empty());
}

#[test]
fn riesz_sweep_short_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("planted_n5_l1.txt");
    let out = exec(&[
        "riesz-sweep", "--problem", p.to_str().unwrap(), "-o", dir.path().to_str().unwrap(),
        "--set", "r_min=10", "--set", "r_max=100", "--set", "r_points=3", "--set", "p=1.0,3.0",
    ]);
    let rep = json(&dir.path().join("riesz_sweep.json"));
    assert_eq!(rep["data"]["probes"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("riesz_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    assert_eq!(out.status.success(), rep["pass"] == Value::Bool(true));
}
