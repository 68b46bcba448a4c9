use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dmeshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmeshare"))
        .args(args)
        .env_remove("DMESHARE_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn invalid_spec_exits_nonzero_with_json_error() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "bad.spec", "kind = transponder\nrho = 1.5\nr_min_km = 300\n");
    let out = dmeshare(&["run", &spec]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_spec");
    let v = err["violations"].as_array().unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[0]["field"], "rho");
    assert_eq!(v[0]["line"], 2);
    assert_eq!(v[1]["field"], "r_max_km");
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = dmeshare(&["validate", "/nonexistent/x.spec"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "runtime");
}

#[test]
fn validate_prints_defaults() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "t.spec", "kind = transponder\n");
    let out = dmeshare(&["validate", &spec]);
    assert!(out.status.success());
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["kind"], "transponder");
    assert_eq!(s["alpha"], 3.5);
    assert_eq!(s["sigma_db"], 10.0);
    assert_eq!(s["lambda_su"], 20.0);
    assert_eq!(s["a_thr_dbm"], -119.0);
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let spec = write(
        tmp.path(),
        "e.spec",
        "kind = airborne\n[experiment]\nkind = fig7-power\n[sweep]\naxis = lambda_su\nvalues = []\n",
    );
    let out = dmeshare(&["run", &spec]);
    assert!(out.status.success());
    assert_eq!(out.stdout, b"lambda_su,p_su_max_dbm,exceed_prob,status\n");
}

#[test]
fn cdf_run_is_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let spec = write(
        tmp.path(),
        "c.spec",
        "kind = transponder\n[mc]\ntrials = 3000\nseed = 42\n[experiment]\nkind = fig3-cdf\n",
    );
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    let one = dmeshare(&["run", &spec, "--threads", "1", "--output", a.to_str().unwrap()]);
    let auto = dmeshare(&["run", &spec, "--threads", "0", "--output", b.to_str().unwrap()]);
    assert!(one.status.success() && auto.status.success());
    let a = fs::read(a).unwrap();
    assert_eq!(a, fs::read(b).unwrap());
    assert!(!a.contains(&b'\r'));
    // A different seed changes the simulated column.
    let c = dmeshare(&["run", &spec, "--seed", "43"]);
    assert_ne!(c.stdout, a);
}

#[test]
fn thread_count_from_environment() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "t.spec", "kind = transponder\n[experiment]\nkind = fig4-ithr\n");
    let out = Command::new(env!("CARGO_BIN_EXE_dmeshare"))
        .args(["run", &spec])
        .env("DMESHARE_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_dmeshare"))
        .args(["run", &spec])
        .env("DMESHARE_THREADS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn json_format_flag() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "t.spec", "kind = transponder\n[experiment]\nkind = fig4-ithr\n");
    let out = dmeshare(&["run", &spec, "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["experiment"], "fig4-ithr");
    assert_eq!(v["columns"][0], "lambda_su");
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["rows"][0][4], "converged");
}

#[test]
fn mc_export_is_byte_identical_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "m.spec", "kind = transponder\n[mc]\ntrials = 500\nseed = 9\n");
    let a = dmeshare(&["mc-export", &spec]);
    let b = dmeshare(&["mc-export", &spec, "--threads", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# kind = transponder"));
    assert_eq!(lines.next(), Some("# i_thr_dbm = -150"));
    assert_eq!(lines.next(), Some("# seed = 9"));
    assert_eq!(lines.next(), Some("# trials = 500"));
    assert!(lines.next().unwrap().starts_with("# scenario_digest = "));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 500);
    assert!(values.iter().all(|v| *v > 0.0));
}

#[test]
fn mc_export_needs_trials() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "m.spec", "kind = airborne\n");
    let out = dmeshare(&["mc-export", &spec]);
    assert_eq!(out.status.code(), Some(2));
    let ok = dmeshare(&["mc-export", &spec, "--trials", "10"]);
    assert!(ok.status.success());
    let zero = dmeshare(&["mc-export", &spec, "--trials", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}
