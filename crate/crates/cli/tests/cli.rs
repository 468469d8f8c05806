//! End-to-end runs of the `hjlab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hjlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hjlab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn scenario(name: &str) -> String {
    format!("[problem]\nscenario = \"{name}\"\n")
}

/// Rows of a 1-D value CSV as (x, u, singular).
fn rows(path: &Path) -> Vec<(f64, f64, bool)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x_1,u,singular,du_1"));
    lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1].parse().unwrap(), c[2].parse().unwrap(), c[3] == "1")
        })
        .collect()
}

#[test]
fn solve_smooth_example_has_no_singular_nodes() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{}[grid]\ntimes = [0.5]\nnodes = 101\n", scenario("example1"));
    let o = hjlab(d.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    let s = json(&out.join("summary.json"));
    assert_eq!(s["fields"][0]["singular_count"], 0);
    assert_eq!(s["fields"][0]["nodes"], 101);
    assert!(out.join("plot.gp").exists());
    let r = rows(&out.join("u_t0.5.csv"));
    assert_eq!(r.len(), 101);
    assert!(r.iter().all(|row| !row.2));
}

#[test]
fn solve_kink_example_flags_the_origin_only() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{}[grid]\ntimes = [0.5]\nnodes = 101\n", scenario("example2"));
    let o = hjlab(d.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&d.path().join("out/u_t0.5.csv"));
    let cell = r[1].0 - r[0].0;
    let singular: Vec<f64> = r.iter().filter(|row| row.2).map(|row| row.0).collect();
    assert!(!singular.is_empty());
    assert!(singular.iter().all(|x| x.abs() <= cell + 1e-12), "{singular:?}");
}

#[test]
fn two_node_grid_writes_two_rows() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{}[grid]\ntimes = [0.25]\nnodes = 2\n", scenario("example1"));
    let o = hjlab(d.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&d.path().join("out/u_t0.25.csv")).len(), 2);
}

#[test]
fn char_modes_report_expected_classes() {
    for (sc, mode, expected) in [
        ("example2", "generalized", "strongly-singular"),
        ("example1", "classical:0.7", "classical"),
        ("example3", "generalized", "weakly-singular"),
    ] {
        let d = TempDir::new().unwrap();
        let o = hjlab(d.path(), &scenario(sc), &["char", "--origin", "0", "--mode", mode]);
        assert_eq!(o.status.code(), Some(0), "{sc} {mode}");
        assert_eq!(stdout(&o), format!("\"{expected}\""), "{sc} {mode}");
        let tr = json(&d.path().join("out/trace.json"));
        assert_eq!(tr["classification"], expected);
        assert!(d.path().join("out/trace.csv").exists());
    }
}

#[test]
fn classify_writes_probes() {
    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &scenario("example2"), &["classify", "--origin", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&d.path().join("out/classification.json"));
    assert_eq!(rep["classification"], "strongly-singular");
    assert_eq!(rep["mode"], "generalized");
    assert!(rep["outcome"].is_object());
}

#[test]
fn subdiff_intervals_match_the_data() {
    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &scenario("example1"), &["subdiff", "--point", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&d.path().join("out/subdiff.json"));
    assert_eq!(r["empty"], false);
    let lo = r["interval"][0].as_f64().unwrap();
    let hi = r["interval"][1].as_f64().unwrap();
    assert!((lo + 1.0).abs() <= 1e-6 && (hi - 1.0).abs() <= 1e-6, "[{lo}, {hi}]");

    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &scenario("example2"), &["subdiff", "--point", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&d.path().join("out/subdiff.json"));
    assert_eq!(r["empty"], true);
    assert!(r["interval"].is_null());
}

#[test]
fn one_sided_kink_refutes_zero_at_every_constant() {
    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &scenario("example4"), &["subdiff", "--point", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&d.path().join("out/subdiff.json"));
    let lo = r["interval"][0].as_f64().unwrap();
    let hi = r["interval"][1].as_f64().unwrap();
    assert!((lo + 1.0).abs() <= 1e-6, "{lo}");
    assert!(hi < 0.0 && hi > -0.05, "{hi}");
    let certs = r["probes"][0]["certificates"].as_array().unwrap();
    assert!(!certs.is_empty());
    for c in certs {
        assert_eq!(c["p"][0], 0.0);
        assert_eq!(c["verdict"], "refuted", "K = {}", c["k"]);
    }
}

#[test]
fn classical_mode_rejects_non_subgradients() {
    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &scenario("example2"), &["char", "--origin", "0", "--mode", "classical:0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    assert_eq!(hjlab(d.path(), "", &["verify", "nope"]).status.code(), Some(2));
    assert_eq!(hjlab(d.path(), &scenario("nope"), &["solve"]).status.code(), Some(2));
}

#[test]
fn malformed_configs_are_usage_errors() {
    let d = TempDir::new().unwrap();
    for bad in ["[grid]\nnodes = 1\n", "[verify]\nvalue_tol = -1.0\n", "[bogus]\nx = 1\n", "not toml =", "[run]\nworkers = 0\n"] {
        assert_eq!(hjlab(d.path(), bad, &["solve"]).status.code(), Some(2), "{bad}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_hjlab")).args(["solve", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_hjlab")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_outside_the_model_box_is_a_domain_error() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{}[grid]\ntimes = [0.5]\nlo = [-1000.0]\nhi = [1000.0]\nnodes = 5\n", scenario("example1"));
    let o = hjlab(d.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tightened_energy_tolerance_fails_verification() {
    let d = TempDir::new().unwrap();
    let cfg = "[verify]\ncriteria = [6]\nenergy_drift_tol = 1e-8\n";
    let o = hjlab(d.path(), cfg, &["verify", "example1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("energy-drift"), "{err}");
    let report = json(&d.path().join("out/report.json"));
    assert_eq!(report["passed"], false);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let cfg = format!("{}[grid]\ntimes = [0.25, 0.5]\nnodes = 81\n", scenario("example4"));
    let run = |workers: &str| {
        let d = TempDir::new().unwrap();
        let o = hjlab(d.path(), &cfg, &["solve", "--workers", workers]);
        assert_eq!(o.status.code(), Some(0));
        ["u_t0.25.csv", "u_t0.5.csv", "summary.json"].map(|f| std::fs::read(d.path().join("out").join(f)).unwrap())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["example.toml", "inline-2d.toml"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let d = TempDir::new().unwrap();
        for cmd in ["solve", "subdiff", "classify"] {
            let o = hjlab(d.path(), &text, &[cmd]);
            assert_eq!(o.status.code(), Some(0), "{name} {cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let d = TempDir::new().unwrap();
    let o = hjlab(d.path(), &std::fs::read_to_string(root.join("inline-2d.toml")).unwrap(), &["classify"]);
    assert_eq!(stdout(&o), "\"strongly-singular\"");
    let s = json(&d.path().join("out/classification.json"));
    assert_eq!(s["scenario"], "cone-2d");
}
