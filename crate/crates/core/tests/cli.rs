use std::fs;
use std::process::{Command, Output};

fn yukawa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yukawa"))
        .args(args)
        .output()
        .expect("spawn yukawa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_beta_is_a_usage_error() {
    let o = yukawa(&["--beta", "warm", "tadpole"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(yukawa(&["diagonalise"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "m = 1\nmass = 2\n").unwrap();
    let o = yukawa(&["--config", path.to_str().unwrap(), "tadpole"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mass"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# comment\nlambda = 3\nbeta = inf\n").unwrap();
    let from_file = yukawa(&[
        "--config",
        path.to_str().unwrap(),
        "spectrum",
        "--levels",
        "1",
    ]);
    let overridden = yukawa(&[
        "--config",
        path.to_str().unwrap(),
        "--lambda",
        "0",
        "spectrum",
        "--levels",
        "1",
    ]);
    assert!(from_file.status.success() && overridden.status.success());
    // sector 1 ground level is mu - lambda^2/(2 m^2) + m/2
    assert!(
        stdout(&from_file).contains("\n1,0,-3.0"),
        "{}",
        stdout(&from_file)
    );
    assert!(
        stdout(&overridden).contains("\n1,0,1.5"),
        "{}",
        stdout(&overridden)
    );
}

#[test]
fn too_small_truncation_names_the_failed_check() {
    let o = yukawa(&["--nmax", "2", "--sweeps", "0", "verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("truncation_convergence"),
        "{}",
        stderr(&o)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn verify_report_is_reproducible() {
    let args = ["--seed", "7", "--sweeps", "2000", "--ntau", "16", "verify"];
    let a = yukawa(&args);
    let b = yukawa(&args);
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["provenance"]["seed"], 7);
    assert_eq!(report["provenance"]["rng"], "ChaCha8");
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for expected in [
        "spectrum",
        "thermal_two_point",
        "mc_phi",
        "permutation_j4_symmetrized",
    ] {
        assert!(
            names.iter().any(|n| n.starts_with(expected)),
            "missing {expected}: {names:?}"
        );
    }
}

#[test]
fn correlator_writes_csv_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corr.csv");
    let o = yukawa(&[
        "--out",
        path.to_str().unwrap(),
        "--nmax",
        "40",
        "correlator",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("tau,analytic,exactdiag,perturbative,mc_mean,mc_stderr")
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 33);
    let cols: Vec<f64> = rows[0]
        .split(',')
        .take(3)
        .map(|s| s.parse().unwrap())
        .collect();
    assert!((cols[1] - cols[2]).abs() < 1e-7);
}

#[test]
fn loops_rejects_unbalanced_momenta() {
    let o = yukawa(&["--beta", "1.0986122886681098", "loops", "--momenta", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("momentum conservation"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn loops_symmetrized_json() {
    let o = yukawa(&[
        "--beta",
        "1.0986122886681098",
        "loops",
        "--momenta=2,-2,5,-5",
        "--symmetrized",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["value"].as_f64().unwrap().abs() < 1e-10, "{v}");
}
