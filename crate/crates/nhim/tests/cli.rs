use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LINEAR: &str = r#"{
  "model": {"kind": "linear", "lambda_s": 0.5, "lambda_u": 2.0},
  "eps": 1e-3,
  "n_max": 30,
  "mesh": 5,
  "disk": {"sigma": [0.3], "u_box": [[-0.1, 0.1]]}
}"#;

fn nhim(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nhim"));
    cmd.args(args).env_remove("NHIM_OUT");
    if let Some(dir) = env_out {
        cmd.env("NHIM_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    nhim(
        &[
            sub,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ],
        None,
    )
}

fn only_file(dir: &Path, suffix: &str) -> PathBuf {
    let mut hits: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_str().unwrap();
            name.ends_with(suffix) && !(suffix == ".json" && name.ends_with(".manifest.json"))
        })
        .collect();
    assert_eq!(
        hits.len(),
        1,
        "expected one {suffix} file in {}",
        dir.display()
    );
    hits.pop().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(only_file(dir, ".json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn linear_model_validates() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let out = tmp.path().join("out");
    let o = run("validate", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["passed"], true);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(only_file(&out, ".manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["experiment"], "validate");
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config"]["model"]["kind"], "linear");
}

#[test]
fn broken_stable_straightening_names_condition_b() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "defective", "defect": "stable_straightening", "strength": 0.05,
            "lambda_s": 0.5, "lambda_u": 2.0, "rho": 0.2}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("validate", &cfg, &out);
    assert_eq!(code(&o), 1);
    let failures = summary(&out)["failures"].clone();
    assert!(
        failures.as_array().unwrap().iter().any(|f| f == "b"),
        "{failures}"
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains('b'));
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("syntax.json", "{\"model\": "),
        (
            "unknown.json",
            r#"{"model": {"kind": "linear", "lambda_s": 0.5, "lambda_u": 2.0}, "horizon": 3}"#,
        ),
        ("kind.json", r#"{"model": {"kind": "circle"}}"#),
        (
            "rate.json",
            r#"{"model": {"kind": "linear", "lambda_s": 1.5, "lambda_u": 2.0}}"#,
        ),
    ];
    for (name, text) in cases {
        let cfg = write_config(tmp.path(), name, text);
        let o = run("validate", &cfg, &out);
        assert_eq!(
            code(&o),
            2,
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = run("validate", &tmp.path().join("missing.json"), &out);
    assert_eq!(code(&o), 2);
    assert!(!out.exists(), "no reports for rejected configurations");
}

#[test]
fn lambda_on_linear_model_finds_k_nine() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let out = tmp.path().join("out");
    let o = run("lambda", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["k"], 9);
    assert_eq!(s["domination"]["negative_margins"], 0);
    let csv = fs::read_to_string(only_file(&out, ".csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("n,c0,c1,distance,incl_s,incl_x,alive,"));
    assert_eq!(lines.count(), 31);
}

#[test]
fn flat_disk_has_k_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &LINEAR.replace("[0.3]", "[0.0]"));
    let out = tmp.path().join("out");
    let o = run("lambda", &cfg, &out);
    assert_eq!(code(&o), 0);
    assert_eq!(summary(&out)["k"], 0);
}

#[test]
fn short_horizon_exits_three_with_partial_series() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "poly", "coupling": 0.3, "lambda_s": 0.5, "lambda_u": 2.0, "rho": 0.5}, "n_max": 2}"#,
    );
    let out = tmp.path().join("out");
    let o = run("lambda", &cfg, &out);
    assert_eq!(code(&o), 3);
    assert_eq!(summary(&out)["k"], Value::Null);
    let csv = fs::read_to_string(only_file(&out, ".csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn twist_annulus_reports_k_and_k_prime() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "twist", "eps_twist": 0.1, "y0": 0.2, "y1": 0.8, "lambda_s": 0.5, "lambda_u": 2.0}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("annulus", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["k"].is_u64());
    assert_eq!(s["k"], s["k_prime"]);
    assert!(s["max_boundary_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn inverted_annulus_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "twist", "eps_twist": 0.1, "y0": 0.8, "y1": 0.8, "lambda_s": 0.5, "lambda_u": 2.0}}"#,
    );
    assert_eq!(code(&run("annulus", &cfg, &tmp.path().join("out"))), 2);
    let lin = write_config(tmp.path(), "lin.json", LINEAR);
    assert_eq!(code(&run("annulus", &lin, &tmp.path().join("out"))), 2);
}

#[test]
fn hamiltonian_defaults_conserve_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "hamiltonian"},
            "ham": {"returns": 10, "invariance_returns": 20}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("ham", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["energy_drift"]["value"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["cylinder_residual"]["passed"], true);
    assert_eq!(s["saddle_fit_audit"]["passed"], true);
}

#[test]
fn integrable_hamiltonian_rotates_by_its_action() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "hamiltonian", "eps": 0.0, "mu": 0.0},
            "ham": {"returns": 3, "invariance_returns": 3, "fit_exponents": false}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("ham", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["integrable"], true);
    assert_eq!(s["rotation"]["passed"], true);
}

#[test]
fn exponent_fit_without_saddle_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": {"kind": "hamiltonian", "eps": 0.0, "mu": 0.0}}"#,
    );
    assert_eq!(code(&run("ham", &cfg, &tmp.path().join("out"))), 2);
}

#[test]
fn identical_runs_write_identical_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run("lambda", &cfg, &a)), 0);
    assert_eq!(code(&run("lambda", &cfg, &b)), 0);
    for suffix in [".json", ".csv"] {
        let x = fs::read(only_file(&a, suffix)).unwrap();
        let y = fs::read(only_file(&b, suffix)).unwrap();
        assert_eq!(x, y, "{suffix} differs");
    }
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let env_dir = tmp.path().join("env");
    let o = nhim(
        &["validate", "--config", cfg.to_str().unwrap(), "--quiet"],
        Some(&env_dir),
    );
    assert_eq!(code(&o), 0);
    let name = only_file(&env_dir, ".json");
    let name = name.file_name().unwrap().to_str().unwrap();
    assert!(name.starts_with("validate_linear_"), "{name}");
    assert!(o.stdout.is_empty());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let out = tmp.path().join("out");
    let o = nhim(
        &[
            "validate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "17",
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reports: validate_linear_"));
    assert_eq!(summary(&out)["conditions"]["seed"], 17);
}

#[test]
fn csv_floats_use_seventeen_significant_digits() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", LINEAR);
    let out = tmp.path().join("out");
    assert_eq!(code(&run("lambda", &cfg, &out)), 0);
    let csv = fs::read_to_string(only_file(&out, ".csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.3);
    let mantissa = row[1].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}
