use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula-bounds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_wall_time(mut v: Value) -> Value {
    if let Some(r) = v.get_mut("report").and_then(Value::as_object_mut) {
        r.remove("wall_time");
    }
    v
}

#[test]
fn product_3d_reproduces_rho() {
    let out = bin(&[
        "bound", "--f", "x1*x2*x3", "--d", "3", "--n", "40", "--sense", "min", "--format", "json",
    ]);
    let v = json(&out);
    let rho = v["report"]["rho_lower"].as_f64().unwrap();
    assert!((rho + 0.625).abs() <= 0.005, "{rho}");
    assert_eq!(v["config"]["f"], "x1*x2*x3");
    assert_eq!(v["config"]["n"], 40);
}

#[test]
fn rho_reports_known_lower_bound() {
    let v = json(&bin(&["rho", "--d", "3", "--n", "5"]));
    let l_d = v["report"]["l_d"].as_f64().unwrap();
    assert!((l_d + 2.0 / 3.0).abs() < 1e-15);
    // n = 5 is too coarse for the lower end to clear l_3; n = 40 is not
    let rho5 = v["report"]["rho_lower"].as_f64().unwrap();
    assert!((rho5 - (8.0 * 0.0096 - 1.0)).abs() < 1e-12);
    let v40 = json(&bin(&["rho", "--d", "3", "--n", "40"]));
    assert!(v40["report"]["rho_lower"].as_f64().unwrap() > l_d);
}

#[test]
fn constant_integrand_human_output() {
    let out = bin(&[
        "bound", "--f", "7", "--d", "2", "--n", "3", "--format", "human",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[7, 7] (gap 0)"), "{text}");
}

#[test]
fn identical_runs_are_identical() {
    let args = [
        "bound",
        "--f",
        "max(x1 - x2, 0) + x3^2",
        "--d",
        "3",
        "--n",
        "8",
        "--sample-density",
        "5",
    ];
    let a = without_wall_time(json(&bin(&args)));
    let b = without_wall_time(json(&bin(&args)));
    assert_eq!(a, b);
}

#[test]
fn sweep_formats() {
    let out = bin(&[
        "sweep", "--f", "x1*x2", "--d", "2", "--n-list", "10,20,40", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("n,sense,lower_value"));
    assert!(rows[3].starts_with("40,min,"));

    let v = json(&bin(&[
        "sweep", "--f", "x1*x2", "--d", "2", "--n-list", "4,8", "--sense", "max",
    ]));
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(
        entries[1]["report"]["gap"].as_f64().unwrap()
            < entries[0]["report"]["gap"].as_f64().unwrap()
    );
}

#[test]
fn export_writes_copula_cdf_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("copula.json");
    let cdf = dir.path().join("cdf.csv");
    let samples = dir.path().join("samples.csv");
    let out = bin(&[
        "export-copula",
        "--f",
        "x1*x2",
        "--d",
        "2",
        "--n",
        "4",
        "--output",
        report.to_str().unwrap(),
        "--cdf-csv",
        cdf.to_str().unwrap(),
        "--cdf-points",
        "5",
        "--samples",
        "100",
        "--samples-csv",
        samples.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());

    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let support = v["copula"]["support"].as_array().unwrap();
    assert_eq!(support.len(), 4);
    // countermonotone: cells (i, 5 - i)
    for entry in support {
        let idx = entry["index"].as_array().unwrap();
        assert_eq!(idx[0].as_u64().unwrap() + idx[1].as_u64().unwrap(), 5);
    }

    let cdf_text = std::fs::read_to_string(&cdf).unwrap();
    assert_eq!(cdf_text.lines().count(), 1 + 25);
    assert_eq!(cdf_text.lines().last().unwrap(), "1.0,1.0,1.0");

    let sample_text = std::fs::read_to_string(&samples).unwrap();
    assert_eq!(sample_text.lines().count(), 101);
    let again = dir.path().join("again.csv");
    bin(&[
        "export-copula",
        "--f",
        "x1*x2",
        "--d",
        "2",
        "--n",
        "4",
        "--output",
        report.to_str().unwrap(),
        "--samples",
        "100",
        "--samples-csv",
        again.to_str().unwrap(),
    ]);
    assert_eq!(sample_text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn verify_passes_on_small_instances() {
    for (f, d, n) in [
        ("x1*x2", "2", "5"),
        ("max(x1 + x2 + x3 - 1.5, 0)", "3", "2"),
        ("x1*x2*x3", "3", "6"),
    ] {
        let v = json(&bin(&["verify", "--f", f, "--d", d, "--n", n]));
        assert_eq!(v["passed"], true, "{v}");
        let names: Vec<&str> = v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        assert!(names.contains(&"cyclical_monotonicity"));
        assert!(names.contains(&"dual_certificate"));
        if d == "2" {
            assert!(names.contains(&"brute_force_assignment"));
        }
        if n == "2" {
            assert!(names.contains(&"vertex_enumeration"));
        }
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"f": "x1*x2", "d": 2, "n": 3, "sense": "max"}"#).unwrap();
    let v = json(&bin(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "6",
    ]));
    assert_eq!(v["config"]["n"], 6);
    assert_eq!(v["config"]["sense"], "max");
    assert_eq!(v["report"]["sense"], "maximize");

    std::fs::write(&cfg, r#"{"d": 2, "grid": 3}"#).unwrap();
    let out = bin(&["bound", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(
        bin(&["bound", "--d", "2", "--n", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(
        bin(&["bound", "--f", "x1 +", "--d", "2", "--n", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bin(&["bound", "--f", "x3", "--d", "2", "--n", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    let limit = bin(&[
        "bound",
        "--f",
        "x1*x2",
        "--d",
        "2",
        "--n",
        "4",
        "--max-iterations",
        "1",
    ]);
    assert_eq!(limit.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&limit.stderr).contains("iteration_limit"));
}

#[test]
fn warns_when_extrema_may_be_inexact() {
    let out = bin(&["bound", "--f", "(x1 - 0.5)^2", "--d", "2", "--n", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sample-density"));
    let quiet = bin(&["bound", "--f", "x1*x2", "--d", "2", "--n", "3"]);
    assert!(quiet.stderr.is_empty());
}

#[test]
fn version_flag() {
    let out = bin(&["--version"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        format!("copula-bounds {}", env!("CARGO_PKG_VERSION"))
    );
}
