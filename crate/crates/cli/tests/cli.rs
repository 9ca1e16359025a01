use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn lagrograph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagrograph"))
        .current_dir(dir)
        .env_remove("LAGROGRAPH_THREADS")
        .env_remove("SOURCE_DATE_EPOCH")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, kind: &str, n: &str, out: &str) {
    let o = lagrograph(dir, &["generate", kind, "--grid-n", n, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

/// Every file of a directory tree, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn generate_then_solve_reproduces_the_quadratic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "quadratic", "33", "gen");
    for f in ["u.field", "du.field", "d2u.field", "theta.field", "generation.json", "manifest.json"] {
        assert!(dir.join("gen").join(f).is_file(), "{f}");
    }
    let o = lagrograph(
        dir,
        &["solve", "sl", "--theta", "gen/theta.field", "--boundary", "gen/u.field", "--out", "sl"],
    );
    assert_eq!(code(&o), 0);
    let report = read_json(&dir.join("sl/report.json"));
    assert_eq!(report["converged"], Value::Bool(true), "{report}");
    assert!(dir.join("sl/u.field").is_file());
}

#[test]
fn hamiltonian_stationary_constant_phase_is_a_fixed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "quadratic", "33", "gen");
    let o = lagrograph(
        dir,
        &["solve", "hs", "--theta-affine", "1.5707963267948966,0,0", "--boundary", "gen/u.field", "--out", "hs"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.join("hs/report.json"));
    assert_eq!(report["iterations"], Value::from(1), "{report}");
    for f in ["u.field", "theta.field", "hs_residual.field"] {
        assert!(dir.join("hs").join(f).is_file(), "{f}");
    }
}

#[test]
fn rotate_writes_the_rotated_graph_and_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "saddle", "33", "gen");
    let o = lagrograph(dir, &["rotate", "--u", "gen/u.field", "--out", "rot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("small-phase threshold"));
    let files = snapshot(&dir.join("rot"));
    assert!(files.len() > 2, "{:?}", files.keys().collect::<Vec<_>>());
    assert!(files.contains_key("manifest.json"));
}

#[test]
fn rotate_rejects_a_hessian_bound_below_the_measured_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "saddle", "33", "gen");
    let o = lagrograph(dir, &["rotate", "--u", "gen/u.field", "--lambda", "0.5", "--out", "rot"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_identities_passes_and_writes_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = lagrograph(dir, &["verify", "identities", "--trials", "200", "--seed", "3", "--out", "v"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS")));
    assert!(!stdout(&o).contains("FAIL"));
    let summary = read_json(&dir.join("v/summary.json"));
    assert_eq!(summary["passed"], Value::Bool(true));
    assert_eq!(summary["trials"], Value::from(200));
}

#[test]
fn verify_rejects_too_few_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lagrograph(tmp.path(), &["verify", "identities", "--trials", "10", "--out", "v"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_writes_report_profiles_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "perturbed_quadratic", "65", "gen");
    let o = lagrograph(dir, &["analyze", "--u", "gen/u.field", "--out", "an"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("empirical C1"));
    let report = read_json(&dir.join("an/report.json"));
    assert!(report["empirical_c1"].as_f64().unwrap().is_finite());
    let centerline = fs::read_to_string(dir.join("an/centerline.csv")).unwrap();
    assert!(centerline.starts_with("x1,u,theta"));
    assert_eq!(centerline.lines().count(), 66);
    assert!(dir.join("an/oscillation.csv").is_file());
}

#[test]
fn budget_needs_lambda_and_reports_the_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&lagrograph(dir, &["budget", "--out", "b"])), 2);
    let o = lagrograph(dir, &["budget", "--lambda", "1", "--out", "b"]);
    assert_eq!(code(&o), 0);
    let budget = read_json(&dir.join("b/budget.json"));
    let delta = budget["delta"].as_f64().unwrap();
    assert!((delta - std::f64::consts::PI / 8.0).abs() < 1e-15, "{budget}");
}

#[test]
fn invalid_flags_and_missing_files_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&lagrograph(dir, &["generate", "nonsense"])), 2);
    assert_eq!(code(&lagrograph(dir, &["generate", "quadratic", "--grid-n", "2", "--out", "g"])), 2);
    assert_eq!(code(&lagrograph(dir, &["generate", "quadratic", "--tol", "-1", "--out", "g"])), 2);
    let o = lagrograph(dir, &["solve", "sl", "--theta", "missing.field", "--boundary", "missing.field", "--out", "x"]);
    assert_eq!(code(&o), 3);
    let o = lagrograph(dir, &["analyze", "--u", "missing.field", "--out", "x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn invalid_thread_count_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lagrograph"))
        .current_dir(tmp.path())
        .env("LAGROGRAPH_THREADS", "zero")
        .args(["budget", "--lambda", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn manifest_checksums_match_the_written_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir, "quadratic", "17", "gen");
    let manifest = read_json(&dir.join("gen/manifest.json"));
    assert_eq!(manifest["command"], Value::from("generate"));
    assert_eq!(manifest["exit_code"], Value::from(0));
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let bytes = fs::read(dir.join("gen").join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn reruns_are_byte_identical_and_thread_independent() {
    let runs: Vec<_> = ["1", "4"]
        .iter()
        .map(|threads| {
            let tmp = tempfile::tempdir().unwrap();
            let dir = tmp.path();
            for args in [
                &["generate", "perturbed_quadratic", "--grid-n", "33", "--out", "gen"][..],
                &["solve", "sl", "--theta", "gen/theta.field", "--boundary", "gen/u.field", "--out", "sl"],
                &["verify", "identities", "--out", "v"],
            ] {
                let o = Command::new(env!("CARGO_BIN_EXE_lagrograph"))
                    .current_dir(dir)
                    .env("LAGROGRAPH_THREADS", threads)
                    .env_remove("SOURCE_DATE_EPOCH")
                    .args(args)
                    .output()
                    .unwrap();
                assert_eq!(code(&o), 0, "{args:?}");
            }
            snapshot(dir)
        })
        .collect();
    assert!(runs[0].len() >= 10);
    assert_eq!(runs[0], runs[1]);
}
