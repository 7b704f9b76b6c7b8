use std::fs;
use std::process::{Command, Output};

fn sfipm(out_dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfipm"))
        .args(args)
        .env("SFIPM_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

#[test]
fn solve_syqp_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["solve", "--syqp", "n=8,m1=4,seed=1", "--variant", "pl-kf"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert!(v["objective"].is_f64());
    assert!(v["n_ipm"].as_u64().unwrap() > 0);
    assert_eq!(v["per_iter_krylov"].as_array().unwrap().len() as u64, v["n_ipm"].as_u64().unwrap());
    assert!(v["ledger"].is_object());
    let files: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(files.len(), 1);
    assert!(files[0].starts_with("solve-") && files[0].ends_with("-pl-kf.json"), "{files:?}");
}

#[test]
fn solve_qps_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/small.qps");
    let out = sfipm(dir.path(), &["solve", "--qps", fixture, "--variant", "d-kc"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["solve", "--qps", "missing.qps", "--variant", "d-kc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
}

#[test]
fn bad_variant_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["solve", "--syqp", "n=8,m1=4", "--variant", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_variant_list_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["bench", "--n", "8", "--m1", "4", "--variants", ""]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["bench", "--n", "8", "--m1", "2,4", "--variants", "d-kc,pl-kf,ph-kf,cp-kc", "--consistent"];
    for d in [&a, &b] {
        let out = sfipm(d.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["bench.csv", "cg_distribution.csv", "summary.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        assert!(!x.is_empty());
    }
    let summary = fs::read_to_string(a.path().join("summary.csv")).unwrap();
    assert!(summary.contains("desk-scale"));
}

#[test]
fn verify_costs_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["verify", "costs"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("verify-costs.json").is_file());
}

#[test]
fn verify_theorems_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["verify", "theorems", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn verify_factorize_once_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfipm(dir.path(), &["verify", "factorize-once"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn unknown_suite_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sfipm(dir.path(), &["verify", "spectra"]).status.code(), Some(2));
}
