use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hjsub::grid::GridFunction;
use hjsub_harness::{run, Outcome, RunOptions, Scenario};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn hjsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjsub")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn flat_scenario(dir: &Path, format: &str) -> PathBuf {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario_path("restrict_flat_transport")).unwrap()).unwrap();
    v["output"] = serde_json::json!({ "format": format });
    let path = dir.join(format!("flat_{format}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn every_shipped_scenario_validates() {
    for entry in std::fs::read_dir(scenario_path("x").parent().unwrap()).unwrap() {
        let path = entry.unwrap().path();
        let out = hjsub(&["validate", path_str(&path)]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn catalog_lists_builtins() {
    let out = hjsub(&["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["circle", "sphere", "torus", "rotation", "transport", "free"] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn schema_describes_scenarios() {
    let out = hjsub(&["schema"]);
    assert!(out.status.success());
    let schema: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let props = &schema["properties"];
    for key in ["name", "kind", "manifold", "hamiltonian", "tolerances"] {
        assert!(props.get(key).is_some(), "schema lacks {key}");
    }
}

#[test]
fn configuration_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_field.json", r#"{ "name": "x", "kind": "invariance_report", "bogus": 1 }"#),
        (
            "bad_expr.json",
            r#"{ "name": "x", "kind": "invariance_report", "manifold": { "catalog": "circle(1)" }, "hamiltonian": { "expr": "p1 *" } }"#,
        ),
        (
            "unknown_manifold.json",
            r#"{ "name": "x", "kind": "invariance_report", "manifold": { "catalog": "klein(1)" }, "hamiltonian": { "catalog": "free" } }"#,
        ),
        ("not_json.json", "{"),
    ];
    for (file, text) in cases {
        let path = dir.path().join(file);
        std::fs::write(&path, text).unwrap();
        let out = hjsub(&["run", path_str(&path)]);
        assert_eq!(out.status.code(), Some(3), "{file}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = hjsub(&["run", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = hjsub(&["run", path_str(&scenario_path("restrict_flat_transport")), "--refine", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes_follow_the_outcome() {
    assert_eq!(hjsub(&["run", path_str(&scenario_path("invariance_circle_rotation"))]).status.code(), Some(0));
    assert_eq!(hjsub(&["run", path_str(&scenario_path("invariance_circle_free"))]).status.code(), Some(1));
    assert_eq!(hjsub(&["run", path_str(&scenario_path("restrict_circle_free"))]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    for name in ["invariance_torus_rotation", "restrict_flat_transport", "convergence_transport"] {
        let s = Scenario::load(&scenario_path(name)).unwrap();
        let a = run(&s, &RunOptions::default()).unwrap();
        let b = run(&s, &RunOptions::default()).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json(), "{name}");
    }
}

#[test]
fn seed_override_changes_samples_only() {
    let s = Scenario::load(&scenario_path("invariance_circle_rotation")).unwrap();
    let base = run(&s, &RunOptions::default()).unwrap();
    let other = run(&s, &RunOptions { seed: Some(s.seed + 1), ..Default::default() }).unwrap();
    assert_eq!(other.scenario.seed, s.seed + 1);
    assert_eq!(base.outcome, Outcome::Pass);
    assert_eq!(other.outcome, Outcome::Pass);
    assert_ne!(base.deterministic_json(), other.deterministic_json());
}

#[test]
fn refine_multiplies_grid_nodes() {
    let s = Scenario::load(&scenario_path("restrict_flat_transport")).unwrap();
    let r = run(&s, &RunOptions { refine: Some(2), ..Default::default() }).unwrap();
    assert_eq!(r.outcome, Outcome::Pass);
    let ambient: Vec<usize> = r.scenario.ambient_grid.as_ref().unwrap().axes.iter().map(|a| a.n).collect();
    assert_eq!(ambient, [256, 21]);
    assert_eq!(r.scenario.chart_grid.as_ref().unwrap().axes[0].n, 256);
}

#[test]
fn out_dir_receives_report_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "binary"] {
        let scenario = flat_scenario(dir.path(), format);
        let out_dir = dir.path().join(format);
        let out = hjsub(&["run", path_str(&scenario), "--out", path_str(&out_dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_dir.join("restrict_flat_transport.report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["outcome"], "pass");
        let stdout: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(stdout["checks"], report["checks"]);

        let ext = if format == "csv" { "csv" } else { "bin" };
        for label in ["ambient", "restricted", "chart"] {
            let path = out_dir.join(format!("restrict_flat_transport.coarse.{label}.{ext}"));
            assert!(path.exists(), "{} missing", path.display());
        }
        if format == "binary" {
            let f = std::fs::File::open(out_dir.join("restrict_flat_transport.coarse.chart.bin")).unwrap();
            let u = GridFunction::read_binary(f).unwrap();
            assert_eq!(u.values.len(), 128);
            assert!((u.t - 0.4).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_format_writes_checks_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = hjsub(&[
        "run",
        path_str(&scenario_path("convergence_transport")),
        "--format",
        "csv",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let checks = std::fs::read_to_string(dir.path().join("convergence_transport.report.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), checks.trim_end());
    assert!(checks.lines().next().unwrap().contains("measured"));
    assert!(checks.lines().any(|l| l.starts_with("order")));
    let tables = std::fs::read_to_string(dir.path().join("convergence_transport.tables.csv")).unwrap();
    assert!(tables.lines().count() >= 5);
}
