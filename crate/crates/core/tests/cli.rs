use std::path::Path;
use std::process::{Command, Output};

use nearcommute::matcore::{c, ComplexMatrix};

fn ac(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ac"))
        .args(args)
        .current_dir(dir)
        .env_remove("AC_SEED")
        .output()
        .expect("ac runs")
}

fn matrix(v: &serde_json::Value) -> ComplexMatrix {
    let rows = v["entries"].as_array().unwrap();
    let n = rows.len();
    ComplexMatrix::from_fn(n, n, |i, j| {
        let z = &rows[i][j];
        c(z[0].as_f64().unwrap(), z[1].as_f64().unwrap())
    })
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn gallery_then_commute_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = ac(&["gallery", "tn-pair", "--n", "3", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["dim"], 8);

    let out = ac(&["commute", "g/tn_x_3.json", "g/tn_z_3.json", "--out", "r.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["bounds_pass"], true);
    assert_eq!(report["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let ap = matrix(&report["outputs"]["a_prime"]);
    let bp = matrix(&report["outputs"]["b_prime"]);
    assert!(max_abs(&(&ap * &bp - &bp * &ap)) < 1e-9);
}

#[test]
fn voiculescu_files_are_unitary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ac(&["gallery", "voiculescu", "--n", "6", "--out", ".", "--cbin"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("voiculescu_u_6.json")).unwrap();
    let u = matrix(&serde_json::from_str(&text).unwrap());
    let gram = u.adjoint() * &u - ComplexMatrix::identity(6, 6);
    assert!(max_abs(&gram) < 1e-14);
    let bin = std::fs::read(dir.path().join("voiculescu_u_6.cbin")).unwrap();
    assert_eq!(bin.len(), 8 + 16 * 36);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = ac(&["--seed", "3", "sweep", "--dim", "12", "--deltas", "0.1,0.01", "--out", "s.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let dist_b: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(dist_b.iter().all(|x| x.is_finite() && *x >= 0.0));
}

#[test]
fn verify_small_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ac(&["verify", "projections", "--trials", "5"], dir.path());
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["violations"], 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ac(&["commute", "missing_a.json", "missing_b.json"], dir.path()).status.code(), Some(1));
    assert_eq!(ac(&["verify", "nonsense"], dir.path()).status.code(), Some(64));
    assert_eq!(ac(&["sweep", "--deltas"], dir.path()).status.code(), Some(64));
    assert_eq!(ac(&["frobnicate"], dir.path()).status.code(), Some(64));

    std::fs::write(dir.path().join("bad.json"), r#"{"version":1,"dim":2,"entries":[[[0,0],[1,0]],[[0,0],[0,0]]],"tags":["hermitian"]}"#).unwrap();
    std::fs::write(dir.path().join("z.json"), r#"{"version":1,"dim":2,"entries":[[[0,0],[0,0]],[[0,0],[0,0]]]}"#).unwrap();
    assert_eq!(ac(&["commute", "bad.json", "z.json"], dir.path()).status.code(), Some(2));
}
