use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cwtori(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwtori")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_clifford() {
    let r = report(&cwtori(&["analyze", "--surface", "clifford", "--dims", "64x64", "--eta", "zero"]));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "analyze");
    let a = &r["result"]["analysis"];
    assert_eq!(a["deg_perp"], 0);
    let (wa, wq) = (a["willmore_energy"].as_f64().unwrap(), a["willmore_energy_q"].as_f64().unwrap());
    assert!((wa - wq).abs() < 1e-8);
    // |H|^2 - K - K_perp = 1 on the Clifford torus, so the energy equals the area
    let area = r["result"]["area"].as_f64().unwrap();
    assert!((area - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    assert!((wa - area).abs() < 1e-9 * area);
    assert!(a["el_residual"].as_f64().unwrap() < 1e-8);
    assert!(r["config"].get("workers").is_none() && r["config"].get("out").is_none());
}

#[test]
fn analyze_homogeneous_reports_sphere_mean_curvature() {
    let r = report(&cwtori(&["analyze", "--surface", "homogeneous", "--param", "r=0.6", "--dims", "32x32"]));
    let (r0, s0) = (0.6_f64, 0.8_f64);
    let h = r["result"]["sphere_mean_curvature"].as_f64().unwrap();
    assert!((h - (s0 / r0 - r0 / s0) / 2.0).abs() < 1e-10, "{h}");
    assert!(r["result"]["euclidean_mean_curvature"].is_null());
}

#[test]
fn unreadable_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("torus.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let arg = format!("file:{}", bad.display());
    assert_eq!(code(&cwtori(&["analyze", "--surface", &arg])), 1);
    let missing = format!("file:{}", dir.path().join("missing.json").display());
    assert_eq!(code(&cwtori(&["analyze", "--surface", &missing])), 1);
    let conf = format!("{}", dir.path().join("missing.conf").display());
    assert_eq!(code(&cwtori(&["analyze", "--config", &conf])), 1);
}

#[test]
fn validation_failures_exit_two() {
    for args in [
        vec!["analyze", "--tol-eig", "0"],
        vec!["analyze", "--annulus", "0,2"],
        vec!["analyze", "--dims", "64"],
        vec!["analyze", "--surface", "conformal-maslov"],
        vec!["analyze", "--surface", "homogeneous", "--param", "r=1.5"],
        vec!["analyze", "--eta", "cmc:0.5", "--surface", "hsl"],
        vec!["analyze", "--surface", "zero-form"],
        vec!["darboux", "--surface", "jordan-form"],
    ] {
        let out = cwtori(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn non_power_of_two_dims_warn() {
    let out = cwtori(&["analyze", "--dims", "24x24"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn classify_clifford_cases() {
    let label = |rho: &str| {
        let eta = format!("cmc:{rho}");
        report(&cwtori(&["classify", "--surface", "clifford", "--eta", &eta, "--dims", "32x32", "--samples", "16"]))["result"]["label"]
            .clone()
    };
    assert_eq!(label("0"), "I");
    assert_eq!(label("0.5"), "II");
    assert_eq!(label("-0.5"), "II");
    let z = report(&cwtori(&["classify", "--surface", "zero-form", "--dims", "16x16"]));
    assert_eq!(z["result"]["label"], "IIIa");
    let j = report(&cwtori(&["classify", "--surface", "jordan-form", "--dims", "16x16"]));
    assert_eq!(j["result"]["label"], "IIIb");
}

#[test]
fn spectral_refuses_case_three() {
    let out = cwtori(&["spectral", "--surface", "zero-form", "--dims", "16x16"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no nontrivial spectral curve"));
}

#[test]
fn spectral_clifford_half_is_rational() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cwtori(&[
        "spectral", "--surface", "clifford", "--eta", "cmc:0.5", "--dims", "32x32", "--circles", "3", "--samples", "16", "--out",
        &out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("spectral.json"));
    assert_eq!(r["result"]["case"], "II");
    assert_eq!(r["result"]["genus"]["kind"], "exact");
    assert_eq!(r["result"]["genus"]["genus"], 0);
    let csv = std::fs::read_to_string(dir.path().join("branches.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "mu_re,mu_im,lam1_re,lam1_im,lam2_re,lam2_im,k_trivial,flags");
    assert_eq!(lines.count(), r["result"]["samples"].as_array().unwrap().len());
}

#[test]
fn darboux_at_one_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cwtori(&["darboux", "--surface", "clifford", "--eta", "cmc:0.5", "--dims", "32x32", "--mu", "1,0", "--out", &out_dir]);
    assert_eq!(code(&out), 5);
    let r = read_json(&dir.path().join("darboux.json"));
    assert_eq!(r["result"]["quality"]["degenerate"], true);
    let mesh = read_json(&dir.path().join("darboux_mesh.json"));
    let f = mesh["f"].as_array().unwrap();
    assert!(f.iter().all(|q| q == &f[0]));
}

#[test]
fn darboux_generic_mu_is_conformal_and_ingestible() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cwtori(&["darboux", "--surface", "clifford", "--eta", "cmc:0.5", "--dims", "64x64", "--mu", "0.8,0.9", "--out", &out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("darboux.json"));
    assert_eq!(r["result"]["quality"]["degenerate"], false);
    assert!(r["result"]["quality"]["conformality"].as_f64().unwrap() < 1e-5);
    let mesh = format!("file:{}", dir.path().join("darboux_mesh.json").display());
    let again = cwtori(&["convert", "--surface", &mesh, "--dims", "64x64"]);
    assert_eq!(code(&again), 0, "{}", String::from_utf8_lossy(&again.stderr));
}

#[test]
fn darboux_bad_eigen_index() {
    let out = cwtori(&["darboux", "--surface", "clifford", "--eta", "cmc:0.5", "--dims", "32x32", "--mu", "0.8,0.9", "--eigen", "5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn harmonic_pairs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cwtori(&["harmonic", "--surface", "clifford", "--eta", "cmc:0.5", "--dims", "32x32", "--samples", "8", "--out", &out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("harmonic.json"));
    assert!(r["result"]["max_distance"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["result"]["spectral"]["genus"]["genus"], 0);
    let csv = std::fs::read_to_string(dir.path().join("harmonic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("mu_re,mu_im,rank1_1_re"));
}

#[test]
fn holonomy_output_is_worker_independent() {
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().display().to_string();
        let out = cwtori(&[
            "holonomy", "--surface", "clifford", "--eta", "cmc:0.3", "--dims", "32x32", "--circles", "2", "--samples", "8",
            "--workers", workers, "--out", &out_dir,
        ]);
        assert_eq!(code(&out), 0);
        let json = std::fs::read(dir.path().join("holonomy.json")).unwrap();
        let csv = std::fs::read(dir.path().join("holonomy.csv")).unwrap();
        (json, csv)
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
    let r: Value = serde_json::from_slice(&a.0).unwrap();
    for s in r["result"]["samples"].as_array().unwrap() {
        assert!(s["det_drift"].as_f64().unwrap() < 1e-8);
        assert!(s["commutator_norm"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "surface = homogeneous\nparam = r=0.6\ndims = 16x16\n").unwrap();
    let conf = conf.display().to_string();
    let r = report(&cwtori(&["analyze", "--config", &conf, "--dims", "32x32"]));
    assert_eq!(r["config"]["dims"], serde_json::json!([32, 32]));
    assert_eq!(r["config"]["surface"], "homogeneous(r=0.6)");
}

#[test]
fn convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    assert_eq!(code(&cwtori(&["convert", "--surface", "clifford", "--dims", "32x32", "--out", &out_dir])), 0);
    let file = format!("file:{}", dir.path().join("surface.json").display());
    let a = report(&cwtori(&["analyze", "--surface", &file, "--dims", "32x32"]));
    let b = report(&cwtori(&["analyze", "--surface", "clifford", "--dims", "32x32"]));
    let (wa, wb) = (
        a["result"]["analysis"]["willmore_energy"].as_f64().unwrap(),
        b["result"]["analysis"]["willmore_energy"].as_f64().unwrap(),
    );
    assert!((wa - wb).abs() < 1e-8 * wb, "{wa} {wb}");
}
