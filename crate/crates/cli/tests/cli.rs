use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rotogp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotogp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("ROTOGP_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn results(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

fn number(v: &Value, key: &str) -> f64 {
    v["outputs"][key].as_f64().unwrap_or_else(|| panic!("missing output {key}"))
}

#[test]
fn solve_gp_two_dimensional_oscillator() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["solve-gp", "--dim", "2", "--omega", "0", "--a", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(dir.path());
    assert!((number(&r, "energy") - 2.0).abs() <= 1e-5);
    assert_eq!(r["outputs"]["winding"], 0);
    assert_eq!(r["passed"], true);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("phi.json")).unwrap()).unwrap();
    let n = side["n"].as_u64().unwrap() as usize;
    assert_eq!(side["dim"], 2);
    assert_eq!(std::fs::metadata(dir.path().join("phi.f64")).unwrap().len() as usize, n * n * 16);
}

#[test]
fn every_check_carries_its_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    rotogp(dir.path(), &["scattering", "--potential", "square 1 2"]);
    let r = results(dir.path());
    for c in r["checks"].as_array().unwrap() {
        assert!(c["tolerance"].is_number() && c["reference"].is_number() && c["passed"].is_boolean(), "{c}");
    }
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    rotogp(dir.path(), &["scattering", "--potential", "hardcore 1.3"]);
    let text = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("\"a\":")).unwrap();
    let mantissa = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{line}");
}

#[test]
fn dyson_check_default_hat_integral() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["dyson-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(dir.path());
    assert!((number(&r, "int_UR") - 4.0 * PI).abs() <= 1e-8);
    assert!(r["outputs"]["e_spectrum"].as_array().unwrap().len() == 3);
}

#[test]
fn heat_bound_dominates_mehler_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["heat-bound", "--V", "harmonic", "--alpha", "1", "--dim", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(dir.path());
    assert!(number(&r, "max_violation") <= 0.0);
    // Brute-force diagonal against the closed-form oscillator kernel.
    let k = &r["outputs"]["kernel"];
    let xs = k["points"].as_array().unwrap();
    let brute = k["brute_diag"].as_array().unwrap();
    for (x, b) in xs.iter().zip(brute) {
        let x = x.as_f64().unwrap();
        let mehler = (2.0 * PI * 2f64.sinh()).powf(-0.5) * (-x * x * 1f64.tanh()).exp();
        assert!((b.as_f64().unwrap() - mehler).abs() < 1e-8, "{x}");
    }
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rotogp(dir.path(), &["solve-gp", "--dim", "4"]).status.code(), Some(2));
    assert_eq!(rotogp(dir.path(), &["scattering", "--potential", "cube 1"]).status.code(), Some(2));
    assert_eq!(rotogp(dir.path(), &["solve-gp", "--init", "spiral"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"subcommand": "solve-gp", "params": {"grid-size": 32}}"#).unwrap();
    let o = rotogp(dir.path(), &["--config", cfg.to_str().unwrap(), "solve-gp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid-size"));
    let o = rotogp(dir.path(), &["--config", cfg.to_str().unwrap(), "heat-bound"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_invariant_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["solve-gp", "--a", "1", "--max-iter", "2", "--init", "gaussian"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(results(dir.path())["passed"], false);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"params": {"n": 32, "box": 12.0, "a": 5.0}}"#).unwrap();
    rotogp(dir.path(), &["--config", cfg.to_str().unwrap(), "solve-gp", "--a", "0"]);
    let r = results(dir.path());
    assert_eq!(r["config"]["n"], 32);
    assert_eq!(r["config"]["a"].as_f64(), Some(0.0));
    assert!((number(&r, "energy") - 2.0).abs() <= 1e-5);
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["solve-gp", "--n", "32", "--box", "12", "--a", "1", "--omega", "-1.2", "--init", "random-phase", "--restarts", "3", "--seed", "7"];
    assert_eq!(rotogp(a.path(), &args).status.code(), Some(0));
    // Second run only from the persisted run file.
    let cfg = a.path().join("config.json");
    assert_eq!(rotogp(b.path(), &["--config", cfg.to_str().unwrap(), "solve-gp"]).status.code(), Some(0));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "phi.f64"), read(b.path(), "phi.f64"));
    assert_eq!(read(a.path(), "phi.json"), read(b.path(), "phi.json"));
    assert_eq!(read(a.path(), "config.json"), read(b.path(), "config.json"));
    let (ra, rb) = (results(a.path()), results(b.path()));
    assert_eq!(ra["outputs"], rb["outputs"]);
    assert_eq!(ra["checks"], rb["checks"]);
}

#[test]
fn analyze_recovers_vortex_lattice_from_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["solve-gp", "--n", "48", "--box", "12", "--a", "2", "--omega", "-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let solved = results(dir.path());
    let winding = solved["outputs"]["winding"].as_i64().unwrap();
    assert!(winding >= 2);
    let dump = dir.path().join("phi.f64");
    let ana = tempfile::tempdir().unwrap();
    assert_eq!(rotogp(ana.path(), &["analyze", "--input", dump.to_str().unwrap()]).status.code(), Some(0));
    let r = results(ana.path());
    assert_eq!(r["outputs"]["winding"].as_i64(), Some(winding));
    assert_eq!(number(&r, "Lz"), number(&solved, "Lz"));
    assert!(ana.path().join("vortices.json").exists());
}

#[test]
fn scan_a_writes_concave_energies() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["scan-a", "--n", "32", "--box", "12", "--values", "0,1,2,4", "--init", "gaussian"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan_a.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,energy,mu,Lz,total_winding"));
    let e: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(e.len(), 4);
    assert!(e.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn fock_ed_respects_product_state_bound() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    // Two modes, on-site 1 and 0.8, exchange 0.25, pair hopping 0.3.
    let mut t = vec![0.0; 16];
    let at = |i: usize, j: usize, k: usize, l: usize| ((i * 2 + j) * 2 + k) * 2 + l;
    t[at(0, 0, 0, 0)] = 1.0;
    t[at(1, 1, 1, 1)] = 0.8;
    for (i, j, k, l) in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)] {
        t[at(i, j, k, l)] = 0.25;
    }
    t[at(0, 0, 1, 1)] = 0.3;
    t[at(1, 1, 0, 0)] = 0.3;
    std::fs::write(&w, serde_json::to_string(&t).unwrap()).unwrap();
    let o = rotogp(dir.path(), &["fock-ed", "--J", "2", "--Nmax", "8", "--e", "0,0.4", "--W-file", w.to_str().unwrap(), "--g", "0.125"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(dir.path());
    assert!(number(&r, "energy") <= number(&r, "product_bound") + 1e-9);
    assert_eq!(r["outputs"]["sector_dim"], 9);
}

#[test]
fn symbols_check_number_operator() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotogp(dir.path(), &["symbols-check", "--op", "adag a", "--z", "0.7+0.2i", "--Z", "6", "--nodes", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(dir.path());
    let lower = r["outputs"]["lower"].as_array().unwrap()[0].as_f64().unwrap();
    let upper = r["outputs"]["upper"].as_array().unwrap()[0].as_f64().unwrap();
    assert!((lower - 0.53).abs() < 1e-14);
    assert!((upper + 0.47).abs() < 1e-14);
    assert!(number(&r, "reconstruction_error") <= 1e-6);
}
