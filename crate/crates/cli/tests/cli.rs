#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_gfloquet");

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
}

fn run(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join(format!("{command}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{command}"));
    let output =
        Command::new(BIN).arg(command).arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap();
    Run { code: output.status.code().unwrap(), stderr: String::from_utf8_lossy(&output.stderr).into_owned(), out }
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[test]
fn analyze_scalar_cosine() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"system": {"kind": "scalar_cosine", "alpha": 0.3, "beta": 1.0, "period": 1.0}}"#;
    let r = run(dir.path(), "analyze", config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let spec = json(r.out.join("spectrum.json"));
    assert_eq!(spec["config_sha256"], sha256(config));
    let converged: Vec<&Value> =
        spec["multipliers"].as_array().unwrap().iter().filter(|m| m["converged"] == true).collect();
    assert_eq!(converged.len(), 1);
    let (re, im) = complex(&converged[0]["value"]);
    assert!((re - 0.3f64.exp()).abs() < 1e-6 && im.abs() < 1e-12, "{re} {im}");
    let verify = json(r.out.join("verify.json"));
    assert!(verify["worst_residual"].as_f64().unwrap() < 1e-6);
    let modes = fs::read_to_string(r.out.join("modes.csv")).unwrap();
    let mut lines = modes.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={}", sha256(config)));
    assert_eq!(lines.next().unwrap(), "sigma,mode0_re_1,mode0_im_1");
    assert_eq!(lines.count(), 257);
}

#[test]
fn analyze_delay_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "analyze", r#"{"system": {"kind": "delay_pi_over_2"}}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let spec = json(r.out.join("spectrum.json"));
    let top: Vec<(f64, f64)> = spec["multipliers"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|m| m["converged"] == true)
        .take(2)
        .map(|m| complex(&m["value"]))
        .collect();
    for want in [-1.0, 1.0] {
        assert!(top.iter().any(|(re, im)| re.hypot(im - want) < 1e-3), "{top:?}");
    }
}

#[test]
fn validation_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"system": {"kind": "custom", "dimension": 1, "period": -1.0, "coefficient": {"constant": [[0.5]]}}}"#,
        r#"{"system": {"kind": "custom", "dimension": 2, "period": 1.0, "coefficient": {"constant": [[0.5]]}}}"#,
        r#"{"system": {"kind": "custom", "dimension": 1, "period": 1.0, "memory_depth": 0.5,
            "coefficient": {"constant": [[0.0]]}, "delay_taps": [{"delay": 1.0, "coefficient": {"constant": [[-1.0]]}}]}}"#,
        r#"{"system": {"kind": "scalar_cosine", "sample": 3}}"#,
    ];
    for config in cases {
        let r = run(dir.path(), "analyze", config, &[]);
        assert_eq!(r.code, 2, "{config}: {}", r.stderr);
        assert!(!r.out.join("spectrum.json").exists());
    }
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "analyze", "{\"system\": {\"kind\": \"scalar_cosine\",\n  \"alpha\": 0.3,,}}", &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 2"), "{}", r.stderr);
    let r = run(
        dir.path(),
        "bands",
        r#"{"potential": {"kind": "free"}, "energies": {"min": 1, "max": "x", "count": 3}}"#,
        &[],
    );
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("energies.max"), "{}", r.stderr);
}

#[test]
fn custom_system_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let custom = r#"{"system": {"kind": "custom", "dimension": 1, "period": 1.0,
        "coefficient": {"fourier": {"mean": [[0.3]], "cos": [[[1.0]]]}}}, "samples": 128}"#;
    let r = run(dir.path(), "analyze", custom, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (re, _) = complex(&json(r.out.join("spectrum.json"))["multipliers"][0]["value"]);
    assert!((re - 0.3f64.exp()).abs() < 1e-6);
}

fn write_cycle(path: &Path, period: f64, samples: &[nalgebra::DVector<f64>]) {
    let h = period / (samples.len() - 1) as f64;
    let mut text = String::from("t,y1,y2\n");
    for (j, y) in samples.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", j as f64 * h, y[0], y[1]));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn stability_of_supplied_van_der_pol_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let (period, samples) = common::van_der_pol_cycle(1.0, 256);
    write_cycle(&dir.path().join("cycle.csv"), period, &samples);
    let r = run(
        dir.path(),
        "stability",
        r#"{"system": {"kind": "van_der_pol", "mu": 1.0}, "cycle_file": "cycle.csv"}"#,
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = json(r.out.join("stability.json"));
    assert_eq!(s["verdict"], "STABLE");
    assert_eq!(s["cycle"]["source"], "user_supplied");
    let (re, im) = complex(&s["trivial_multiplier"]);
    assert!((re - 1.0).hypot(im) < 1e-3, "{re} {im}");
    assert!(s["phase_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn stability_of_linear_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "stability", r#"{"system": {"kind": "linear_stable"}}"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = json(r.out.join("stability.json"));
    assert_eq!(s["verdict"], "STABLE");
    assert!(s["trivial_multiplier"].is_null());
}

#[test]
fn bad_cycle_files_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let (period, samples) = common::van_der_pol_cycle(1.0, 64);
    let h = period / 64.0;
    let three: String =
        samples.iter().enumerate().map(|(j, y)| format!("{},{},{},0\n", j as f64 * h, y[0], y[1])).collect();
    fs::write(dir.path().join("three.csv"), three).unwrap();
    let mut open = samples.clone();
    open[64][0] += 0.1;
    write_cycle(&dir.path().join("open.csv"), period, &open);
    for file in ["three.csv", "open.csv", "missing.csv"] {
        let config = format!(r#"{{"system": {{"kind": "van_der_pol"}}, "cycle_file": "{file}"}}"#);
        let r = run(dir.path(), "stability", &config, &[]);
        assert_eq!(r.code, 2, "{file}: {}", r.stderr);
    }
}

#[test]
fn kronig_penney_bands_follow_discriminant() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"potential": {"kind": "kronig_penney", "strength": 3.0, "lattice": 1.0},
        "energies": {"min": 0.05, "max": 40.0, "count": 200}}"#;
    let r = run(dir.path(), "bands", config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(r.out.join("bands.csv")).unwrap();
    let mut disagreements = 0;
    for line in csv.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        let e: f64 = cols[0].parse().unwrap();
        let p: usize = cols[1].parse().unwrap();
        let q = e.sqrt();
        let allowed = (q.cos() + 3.0 * q.sin() / q).abs() <= 1.0;
        if allowed != (p == 2) {
            disagreements += 1;
        }
        assert_eq!(cols.len(), 2 + p, "{line}");
    }
    assert!(disagreements <= 2, "{disagreements}");
    let diag = json(r.out.join("diagnostics.json"));
    assert_eq!(diag["failures"], 0);
    assert_eq!(diag["records"].as_array().unwrap().len(), 200);
    assert!(json(r.out.join("extrema.json"))["extrema"].as_array().unwrap().is_empty());
}

#[test]
fn free_particle_k_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"potential": {"kind": "free"}, "energies": {"min": 0.1, "max": 9.0, "count": 25}}"#;
    let r = run(dir.path(), "bands", config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(r.out.join("bands.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "energy,p,k1,k2");
    for line in csv.lines().skip(2) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(v[1], 2.0);
        assert!((v[3] - v[0].sqrt()).abs() <= 1e-6 * v[0].sqrt(), "{line}");
        assert!((v[2] + v[3]).abs() <= 1e-12, "{line}");
    }
}

#[test]
fn empty_energy_range_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for energies in [r#"{"min": 1.0, "max": 2.0, "count": 0}"#, r#"{"min": 3.0, "max": 2.0, "count": 10}"#] {
        let config = format!(r#"{{"potential": {{"kind": "free"}}, "energies": {energies}}}"#);
        let r = run(dir.path(), "bands", &config, &[]);
        assert_eq!(r.code, 2, "{}", r.stderr);
        assert!(r.stderr.contains("empty"), "{}", r.stderr);
    }
}

#[test]
fn overrides_change_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"potential": {"kind": "free"}, "energies": {"min": 1.0, "max": 2.0, "count": 5}}"#;
    let plain = json(run(dir.path(), "bands", config, &[]).out.join("extrema.json"))["config_sha256"].clone();
    let r = run(dir.path(), "bands", config, &["--grid", "64", "--jobs", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(r.out.join("diagnostics.json"))["samples"], 64);
    let overridden = json(r.out.join("extrema.json"))["config_sha256"].clone();
    assert_eq!(plain, sha256(config));
    assert_ne!(plain, overridden);
    assert_eq!(run(dir.path(), "bands", config, &["--jobs", "0"]).code, 2);
}
