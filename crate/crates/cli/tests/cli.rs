use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn thinfilm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinfilm")).args(args).output().expect("spawn thinfilm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_COSINE: &str = r#"
[model]
n = 2.0
eps = 1e-6
delta = 1e-3
[grid]
N = 32
[solver]
t_end = 0.05
dt_max = 1e-3
[initial]
kind = "cosine"
amplitude = 0.1
[output]
stride = 1
"#;

fn validate_summary(summary: &Value) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/summary.schema.json")).expect("schema parses");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(summary).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "summary violates schema: {errors:?}");
}

#[test]
fn flat_run_is_constant_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nN = 32\n[solver]\nt_end = 0.1\ndt_max = 0.01\n[initial]\nkind = \"flat\"\noffset = 0.7\n[analysis]\ndecay_fit = false\n",
    );
    let out_dir = tmp.path().join("flat");
    let out = thinfilm(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(out_dir.join("diag.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mass,energy_delta,energy_0,entropy_G0,entropy_Geps,min_u,diss_energy,diss_entropy,wsup_beta,wl2_mu,wgrad_gamma"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() >= 2);
    for r in &rows {
        assert_eq!(&r[1..], &rows[0][1..]);
    }
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["status"], "completed");
    validate_summary(&summary);
    assert!(out_dir.join("snap_0000.csv").exists());
}

#[test]
fn missing_config_exits_3() {
    let out = thinfilm(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bad_config_and_args_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nn = 2.0\nbogus = 1\n");
    assert_eq!(code(&thinfilm(&["run", "--config", cfg.to_str().unwrap()])), 3);
    let cfg = write_config(tmp.path(), "[grid]\nN = 7\n");
    assert_eq!(code(&thinfilm(&["run", "--config", cfg.to_str().unwrap()])), 3);
    let cfg = write_config(tmp.path(), "[model]\ntheta = 0.9\n");
    assert_eq!(code(&thinfilm(&["run", "--config", cfg.to_str().unwrap()])), 3);
    assert_eq!(code(&thinfilm(&["frobnicate"])), 3);
    assert_eq!(code(&thinfilm(&["analyze", "hardy", "--gamma", "-1"])), 3);
    assert_eq!(code(&thinfilm(&["--help"])), 0);
}

#[test]
fn cosine_run_records_decay_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_COSINE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let out = thinfilm(&["run", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(a.join("diag.csv")).unwrap(), fs::read(b.join("diag.csv")).unwrap());
    let summary = read_json(&a.join("summary.json"));
    validate_summary(&summary);
    assert!(summary["decay_fit"]["B_fit"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["config"]["solver"]["newton_tol"], 1e-10);
    assert_eq!(summary["config"]["model"]["theta"], 0.25);

    // decay analysis of the written diagnostics agrees with the summary
    let out = thinfilm(&["analyze", "decay", "--input", a.join("diag.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fit["B_fit"], summary["decay_fit"]["B_fit"]);
    assert!(a.join("decay.json").exists());

    // weak residual of the run directory
    let out = thinfilm(&["analyze", "weak", "--input", a.to_str().unwrap(), "--k", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let weak: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(weak["weak_residual"].as_f64().unwrap().is_finite());
}

#[test]
fn decay_on_synthetic_series() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("diag.csv");
    let mut text = String::from(
        "t,mass,energy_delta,energy_0,entropy_G0,entropy_Geps,min_u,diss_energy,diss_entropy,wsup_beta,wl2_mu,wgrad_gamma\n",
    );
    for k in 0..100 {
        let t = 0.05 * k as f64;
        let e = 3.0 * (-2.0 * t).exp();
        text.push_str(&format!("{t:.16e},2,{e:.16e},{e:.16e},0,0,1,0,0,0,0,0\n"));
    }
    fs::write(&path, text).unwrap();
    let out = thinfilm(&["analyze", "decay", "--input", path.to_str().unwrap(), "--t-start", "0", "--t-end", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["A_fit"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((fit["B_fit"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn steady_flat_has_zero_residual() {
    let out = thinfilm(&["analyze", "steady", "--c1", "0", "--c2", "0", "--c3", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["residual"], 0.0);
    let out = thinfilm(&["analyze", "steady", "--c1", "-1", "--c2", "0", "--c3", "-5"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn hardy_ladder_below_trial_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = thinfilm(&["analyze", "hardy", "--gamma", "1", "--N", "64,128,256", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let q = r["hardy_min"].as_f64().unwrap();
        assert!(q > 0.0 && q <= 0.8);
    }
    assert_eq!(read_json(&tmp.path().join("hardy.json")), v);
}

#[test]
fn sweeps_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_COSINE);
    let single = tmp.path().join("single");
    let out = thinfilm(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "eps", "--values", "1e-3", "--out",
        single.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&single.join("report.json"));
    assert_eq!(report["distances"].as_array().unwrap().len(), 0);
    assert!(single.join("eps_00").join("diag.csv").exists());

    let delta = tmp.path().join("delta");
    let out = thinfilm(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "delta", "--values", "1e-1,1e-2", "--workers", "2",
        "--out", delta.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&delta.join("report.json"));
    assert_eq!(report["coupling"], "square");
    assert_eq!(report["members"][1]["eps"].as_f64().unwrap(), 1e-4);
    assert!(report["complete"].as_bool().unwrap());
    let member = read_json(&delta.join("delta_01").join("summary.json"));
    validate_summary(&member);

    let out = thinfilm(&["sweep", "--config", cfg.to_str().unwrap(), "--param", "eps", "--values", "1e-4,1e-3"]);
    assert_eq!(code(&out), 3);
}
