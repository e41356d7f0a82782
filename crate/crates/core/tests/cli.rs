//! End-to-end runs of the `qptkit` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qptkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qptkit")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("output_dir = {:?}\n{body}", dir.join("out").display().to_string())).unwrap();
    path.display().to_string()
}

const L3: &str = "num_qubits = 3\nlayers = [1]\ncircuits = [\"trotter2\", \"compressed\"]\nshots = 256\nseed = 4\n\n[adam]\nrestarts = 2\nmax_iters = 400\n";

#[test]
fn compress_qpt_spectrum_compose_from_one_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), L3);
    let out = dir.path().join("out");

    let c = stdout_json(&qptkit(&["compress", "-c", &cfg]));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let rows = trace.lines().count() - 2;
    assert!(rows > 0 && rows <= 2 * 400, "{rows}");
    let q = stdout_json(&qptkit(&["qpt", "--mode", "full", "-c", &cfg]));
    let s = stdout_json(&qptkit(&["spectrum", "-c", &cfg]));
    assert_eq!(c["config_hash"], q["config_hash"]);
    assert_eq!(q["config_hash"], s["config_hash"]);

    // the compressed circuit comes from params.json, χ from chi.json
    let (ec, eq) = (c["runs"][0]["eps"].as_f64().unwrap(), q["runs"][1]["eps"].as_f64().unwrap());
    assert!((ec - eq).abs() < 1e-12 * ec.max(1e-3), "{ec} vs {eq}");
    for i in 0..2 {
        assert_eq!(q["runs"][i]["fidelity"], s["runs"][i]["fidelity"]);
        let stats = &s["runs"][i]["spectral"];
        assert!(stats["mean_modulus"].as_f64().unwrap() < 1.0);
    }
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    for e in stats["entries"].as_array().unwrap() {
        let h = &e["stats"]["histogram"];
        let total: u64 = h["counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum::<u64>() + h["overflow"].as_u64().unwrap();
        assert_eq!(total, 64);
    }
    assert!(!stats["ideal_angles"].as_array().unwrap().is_empty());

    let hash = q["config_hash"].as_str().unwrap();
    for f in ["config.json", "params.json", "trace.csv", "chi.csv", "chi.json", "fidelity.csv", "spectrum.csv", "stats.json", "result.json"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.contains(hash), "{f} lacks the config hash");
        assert!(text.contains(qptkit::VERSION), "{f} lacks the version");
    }
    let chi_rows = fs::read_to_string(out.join("chi.csv")).unwrap().lines().count();
    assert_eq!(chi_rows, 2 + 2 * 64 * 64);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let body = "num_qubits = 2\nlayers = [1, 2]\ncircuits = [\"trotter1\", \"compressed\"]\nshots = 128\n\n[adam]\nrestarts = 2\nmax_iters = 100\n";
    let (ca, cb) = (write_config(a.path(), body), write_config(b.path(), body));
    for cfg in [&ca, &cb] {
        stdout_json(&qptkit(&["qpt", "--mode", "sqpt", "-c", cfg]));
    }
    for f in ["chi.csv", "elements.csv", "twirl.csv", "fidelity.csv", "params.json", "chi.json", "result.json"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn seed_flag_changes_shot_noise_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_qubits = 2\nlayers = [1]\ncircuits = [\"trotter1\"]\n");
    let a = stdout_json(&qptkit(&["twirl", "-c", &cfg, "--seed", "1"]));
    let b = stdout_json(&qptkit(&["twirl", "-c", &cfg, "--seed", "2"]));
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["runs"][0]["eps"], b["runs"][0]["eps"]);
    let tr = a["runs"][0]["chi_trace"].as_f64().unwrap();
    assert!((tr - 1.0).abs() < 0.05, "{tr}");
}

#[test]
fn scan_and_qasm_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_qubits = 3\nlayers = [1, 2]\ncircuits = [\"trotter1\", \"trotter2\"]\n");
    let s = stdout_json(&qptkit(&["infidelity-scan", "-c", &cfg]));
    let runs = s["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    let t2 = runs.iter().find(|r| r["circuit"] == "trotter2" && r["layers"] == 2).unwrap();
    let eps = t2["eps"].as_f64().unwrap();
    assert!(eps > 0.75e-5 && eps < 3e-5, "{eps}");

    stdout_json(&qptkit(&["export-qasm", "-c", &cfg]));
    let text = fs::read_to_string(dir.path().join("out").join("trotter2_L3_open_n2.qasm")).unwrap();
    assert!(text.contains("OPENQASM 3.0;"));
    let body: String = text.lines().filter(|l| !l.starts_with("//")).collect::<Vec<_>>().join("\n");
    let parsed = qptkit::circuit::qasm::parse(&body).unwrap();
    assert_eq!(parsed.cnot_count(), t2["cnot_count"].as_u64().unwrap() as usize);
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = qptkit(&["qpt", "--mode", "full", "--set", "num_qubits=4", "-o", &dir.path().display().to_string()]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("mode/L mismatch"));

    let out = qptkit(&["check", "--set", "noise.p_typo=0.1"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("p_typo"));

    let out = qptkit(&["check", "-c", "/nonexistent/config.toml"]);
    assert!(!out.status.success());
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&out.stderr).unwrap()["error"], "config");

    let out = qptkit(&["tomograph"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&out.stderr).unwrap()["error"], "usage");
}

#[test]
fn check_prints_resolved_config() {
    let v = stdout_json(&qptkit(&["check", "--set", "seed=9", "--shots", "64"]));
    assert_eq!(v["config"]["noise"]["seed"], 9);
    assert_eq!(v["config"]["shots"], 64);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);
}
