//! End-to-end runs of the installed binary: exit codes, output schemas,
//! byte-level determinism and the simulate-then-fit loop.

#![allow(clippy::excessive_precision)] // reference values are frozen at full printed precision

use std::path::Path;
use std::process::{Command, Output};

use approx::assert_relative_eq;

fn subtherm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subtherm"))
        .args(args)
        .current_dir(dir)
        .env_remove("SUBTHERM_THREADS")
        .env_remove("SUBTHERM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).expect("utf8 output")
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let bad_param = subtherm(dir.path(), &["pmf", "--k", "3", "--m", "5", "--M", "2", "--mu0", "0.6"]);
    assert_eq!(bad_param.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&bad_param.stderr).is_empty());

    let missing_file =
        subtherm(dir.path(), &["fit", "--samples", "no_such_file.csv", "--k", "1", "--m", "1", "--M", "1"]);
    assert_eq!(missing_file.status.code(), Some(2));

    let parse_error = subtherm(dir.path(), &["pmf", "--k", "3", "--no-such-flag"]);
    assert_eq!(parse_error.status.code(), Some(1));

    let bare = subtherm(dir.path(), &[]);
    assert_eq!(bare.status.code(), Some(1));

    let help = subtherm(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let version = subtherm(dir.path(), &["--version"]);
    assert_eq!(version.status.code(), Some(0));
}

#[test]
fn pmf_json_document_is_schema_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = subtherm(
        dir.path(),
        &["pmf", "--k", "3", "--m", "1", "--M", "2", "--mu0", "0.644", "--format", "json"],
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["manifest"]["command"], "pmf");
    assert_eq!(doc["manifest"]["parameters"]["mu0"], "0.644");
    assert_relative_eq!(doc["moments"]["mean"].as_f64().unwrap(), 1.61, max_relative = 1e-12);
    assert_relative_eq!(doc["moments"]["g2"].as_f64().unwrap(), 1.6, max_relative = 1e-10);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows[0]["n"], 0);
    assert_relative_eq!(
        rows[0]["probability"].as_f64().unwrap(),
        0.3350556572801490653315,
        max_relative = 1e-12
    );
}

#[test]
fn geometric_special_case_prints_a_geometric_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = subtherm(dir.path(), &["pmf", "--k", "0", "--m", "1", "--M", "1", "--mu0", "0.5"]);
    let text = stdout_of(&out);
    let probs: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (n, &p) in probs.iter().enumerate() {
        let want = (1.0 / 1.5) * (0.5f64 / 1.5).powi(n as i32);
        assert_relative_eq!(p, want, max_relative = 1e-12);
    }
}

#[test]
fn polya_exact_emits_rational_strings() {
    let dir = tempfile::tempdir().unwrap();
    let out = subtherm(dir.path(), &["polya", "--k", "2", "--m", "1", "--M", "2", "--exact"]);
    let text = stdout_of(&out);
    assert!(text.contains("0,1/3"), "missing uniform rational rows:\n{text}");
    assert!(text.contains("1,1/3"));
    assert!(text.contains("2,1/3"));

    let json = subtherm(
        dir.path(),
        &["polya", "--k", "2", "--m", "1", "--M", "2", "--exact", "--format", "json"],
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&json)).unwrap();
    assert_eq!(doc["rows"][0]["probability"], "1/3");
}

#[test]
fn urn_reruns_with_one_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "urn", "--scheme", "boson", "--k", "3", "--m", "2", "--M", "4", "--trials", "20000",
        "--seed", "17", "--out", "urn_a.csv",
    ];
    subtherm(dir.path(), &args);
    let mut again = args;
    again[args.len() - 1] = "urn_b.csv";
    subtherm(dir.path(), &again);
    let a = std::fs::read(dir.path().join("urn_a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("urn_b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("urn_a.csv.manifest.json").exists());
    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("urn_a.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["command"], "urn");
    assert_eq!(sidecar["seed"], 17);
    assert!(sidecar["timestamp"].is_string());
}

#[test]
fn fermion_draining_the_urn_is_a_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let out = subtherm(
        dir.path(),
        &["urn", "--scheme", "fermion", "--k", "3", "--m", "3", "--M", "3", "--trials", "1000", "--seed", "2"],
    );
    let text = stdout_of(&out);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("outcome")).collect();
    assert_eq!(data.len(), 4);
    assert!(data[3].starts_with("3,1000,1,"), "last row: {}", data[3]);
}

#[test]
fn quadrature_rows_are_symmetric_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let out = subtherm(
        dir.path(),
        &["quadrature", "--k", "3", "--m", "1", "--M", "1", "--mu0", "0.675"],
    );
    let text = stdout_of(&out);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    let n = rows.len();
    for i in 0..n / 2 {
        assert_eq!(rows[i].1, rows[n - 1 - i].1, "asymmetric at {}", rows[i].0);
        assert_eq!(rows[i].0, -rows[n - 1 - i].0);
    }
    let mass: f64 = (0..n - 1)
        .map(|i| 0.5 * (rows[i].1 + rows[i + 1].1) * (rows[i + 1].0 - rows[i].0))
        .sum();
    assert!((mass - 1.0).abs() < 1e-6, "trapezoid mass {mass}");
}

#[test]
fn simulate_then_fit_recovers_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let sim = subtherm(
        dir.path(),
        &[
            "simulate", "--M", "1", "--k", "1", "--mu0", "0.6", "--groups", "5000", "--mode",
            "idealized", "--seed", "33", "--out", "sim.csv",
        ],
    );
    assert!(sim.status.success());
    let header = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(header.contains("# accepted=5000"));
    assert!(header.contains("# empty=false"));

    let fit = subtherm(
        dir.path(),
        &[
            "fit", "--samples", "sim.csv", "--k", "1", "--m", "1", "--M", "1", "--truth-mu0",
            "0.6",
        ],
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&fit)).unwrap();
    assert_eq!(doc["fit"]["converged"], true);
    let mu0_hat = doc["fit"]["mu0_hat"].as_f64().unwrap();
    assert!((0.45..0.75).contains(&mu0_hat), "mu0_hat {mu0_hat}");
    assert!(doc["fidelity_vs_truth"].as_f64().unwrap() > 0.99);
    assert!(doc["chi2"]["p_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn empty_acceptance_is_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // demanding 5 clicks from 2 dim modes at r=1% almost never happens
    let out = subtherm(
        dir.path(),
        &[
            "simulate", "--M", "2", "--k", "5", "--mu0", "0.1", "--groups", "2000", "--mode",
            "physical", "--seed", "3", "--out", "empty.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert!(text.contains("# empty=true"), "expected the empty flag:\n{text}");
}

#[test]
fn figures_emit_their_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("figs");
    let two = subtherm(
        dir.path(),
        &["--out-dir", out_dir.to_str().unwrap(), "figures", "--which", "2", "--seed", "4"],
    );
    assert!(two.status.success());
    let three = subtherm(
        dir.path(),
        &["--out-dir", out_dir.to_str().unwrap(), "figures", "--which", "3"],
    );
    assert!(three.status.success());
    for name in [
        "fig2_M1_curve.csv",
        "fig2_M1_hist.csv",
        "fig2_M2_curve.csv",
        "fig2_M2_hist.csv",
        "fig2_M3_curve.csv",
        "fig2_M3_hist.csv",
        "fig3.csv",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
        assert!(out_dir.join(format!("{name}.manifest.json")).exists(), "missing sidecar of {name}");
    }
    let fig3 = std::fs::read_to_string(out_dir.join("fig3.csv")).unwrap();
    let data_rows = fig3.lines().filter(|l| !l.starts_with('#') && !l.starts_with("modes")).count();
    assert_eq!(data_rows, 18);
    let hist = std::fs::read_to_string(out_dir.join("fig2_M1_hist.csv")).unwrap();
    assert!(hist.contains("# samples=10000"));
}

#[test]
fn out_dir_env_variable_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_subtherm"))
        .args(["pmf", "--k", "1", "--m", "1", "--M", "1", "--mu0", "0.3", "--out", "pmf.csv"])
        .current_dir(dir.path())
        .env_remove("SUBTHERM_THREADS")
        .env("SUBTHERM_OUT_DIR", &target)
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert!(target.join("pmf.csv").exists());
}
