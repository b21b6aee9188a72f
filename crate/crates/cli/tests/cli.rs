use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn plateau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plateau"))
        .env_remove("PLATEAU_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const CIRCLE: &str = r#"{"dimension": 2, "builtin": "circle", "config": {"nodes": 64}}"#;
const ELLIPSE: &str = r#"{"dimension": 2, "builtin": "ellipse", "params": {"a": 2, "b": 1}}"#;

#[test]
fn circle_solves_and_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "circle.json", CIRCLE);
    let out = dir.path().join("out");
    let o = plateau(&["solve", "--contour", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(out.join("report.json"))["converged"], Value::Bool(true));
    let obj = std::fs::read_to_string(out.join("surface.obj")).unwrap();
    assert!(obj.lines().any(|l| l.starts_with("v ")) && obj.lines().any(|l| l.starts_with("f ")));
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,energy,grad_norm\n"));
}

#[test]
fn malformed_spec_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "bad.json", r#"{"dimension": 2, "builtin": "#);
    let o = plateau(&["solve", "--contour", &spec, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));

    let missing = dir.path().join("missing.json");
    let o = plateau(&["solve", "--contour", missing.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(code(&o), 1);

    let typo = write(dir.path(), "typo.json", r#"{"dimension": 2, "builtin": "circle", "config": {"nodez": 8}}"#);
    let o = plateau(&["solve", "--contour", &typo, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nodez"), "{}", stderr(&o));
}

#[test]
fn iteration_budget_gives_exit_two_and_a_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "ellipse.json", ELLIPSE);
    let out = dir.path().join("out");
    let o = plateau(&["solve", "--contour", &spec, "--out", out.to_str().unwrap(), "--max-iters", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let report = json(out.join("report.json"));
    assert_eq!(report["converged"], Value::Bool(false));
    assert_eq!(report["iterations"], 1);
}

#[test]
fn flags_override_the_config_block() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "circle.json", CIRCLE);
    let out = dir.path().join("out");
    let o = plateau(&["solve", "--contour", &spec, "--out", out.to_str().unwrap(), "--nodes", "32"]);
    assert_eq!(code(&o), 0);
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["config"]["nodes"], 32);
    assert_eq!(manifest["config"]["max_iters"], 2000);
    assert_eq!(json(out.join("report.json"))["config"]["nodes"], 32);
}

#[test]
fn manifest_lists_exactly_the_files_written() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "curve.json",
        r#"{"dimension": 4, "builtin": "fourier_curve",
            "params": {"cos": [[1, 0, 0, 0], [0, 0, 0.5, 0]], "sin": [[0, 1, 0, 0], [0, 0, 0, 0.5]]},
            "config": {"nodes": 64}}"#,
    );
    let out = dir.path().join("out");
    let o = plateau(&[
        "--threads",
        "2",
        "solve",
        "--contour",
        &spec,
        "--out",
        out.to_str().unwrap(),
        "--metric-grid",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(out.join("manifest.json"));
    let mut listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
    for name in ["surface.obj", "surface.csv", "surface.boundary.csv", "metric_grid.csv", "manifest.json"] {
        assert!(listed.iter().any(|f| f == name), "{name} missing");
    }
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["threads"], 2);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["inputs"][0].as_str().unwrap().ends_with("curve.json"));
}

fn solved(dir: &Path) -> PathBuf {
    let spec = write(dir, "ellipse.json", ELLIPSE);
    let out = dir.join("out");
    let o = plateau(&["solve", "--contour", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn check_accepts_a_fresh_report_at_both_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = solved(dir.path());
    let report = out.join("report.json");
    let surface = out.join("surface.obj");
    for scale in ["1", "2"] {
        let o = plateau(&[
            "check",
            "--report",
            report.to_str().unwrap(),
            "--surface",
            surface.to_str().unwrap(),
            "--grid-scale",
            scale,
        ]);
        assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
        assert!(stdout.contains("surface_vertices"));
    }
    let csv = out.join("surface.boundary.csv");
    let o = plateau(&["check", "--report", report.to_str().unwrap(), "--surface", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn check_names_a_corrupted_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = solved(dir.path());
    let mut report = json(out.join("report.json"));
    let e = report["douglas_energy"].as_f64().unwrap();
    report["douglas_energy"] = Value::from(e * 1.01);
    let bad = write(dir.path(), "bad.json", &report.to_string());
    let surface = out.join("surface.obj");
    let o = plateau(&["check", "--report", &bad, "--surface", surface.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("douglas_energy"), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("FAIL ")).count(), 1, "{stdout}");
}

#[test]
fn check_catches_an_edited_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = solved(dir.path());
    let obj = out.join("surface.obj");
    let text = std::fs::read_to_string(&obj).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[0] = "v 9 9 9";
    std::fs::write(&obj, lines.join("\n")).unwrap();
    let report = out.join("report.json");
    let o = plateau(&["check", "--report", report.to_str().unwrap(), "--surface", obj.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("surface_vertices"));
}

#[test]
fn check_of_missing_sidecar_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = solved(dir.path());
    std::fs::remove_file(out.join("surface.boundary.csv")).unwrap();
    let report = out.join("report.json");
    let obj = out.join("surface.obj");
    let o = plateau(&["check", "--report", report.to_str().unwrap(), "--surface", obj.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn map2d_writes_univalency_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "offset.json",
        r#"{"dimension": 2, "builtin": "circle", "params": {"radius": 2, "cx": 1}, "config": {"nodes": 128}}"#,
    );
    let out = dir.path().join("out");
    let o = plateau(&["map2d", "--contour", &spec, "--out", out.to_str().unwrap(), "--grid", "8x8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let u = json(out.join("univalency.json"));
    assert_eq!(u["univalent"], Value::Bool(true));
    let grid = std::fs::read_to_string(out.join("image_grid.csv")).unwrap();
    assert!(grid.starts_with("u,v,x,y\n"));
    assert_eq!(grid.lines().count() - 1, u["samples"].as_array().unwrap().len());
}

#[test]
fn map2d_reports_a_folded_map() {
    // A thin C shape: conformal crowding defeats the discretization and the
    // extension folds over in the arms.
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "c.json",
        r#"{"dimension": 2, "interpolation": "linear",
            "points": [[0, 0], [3, 0], [3, 0.3], [0.3, 0.3], [0.3, 2.7], [3, 2.7], [3, 3], [0, 3]]}"#,
    );
    let out = dir.path().join("out");
    let o = plateau(&["map2d", "--contour", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("not univalent"));
    assert_eq!(json(out.join("univalency.json"))["univalent"], Value::Bool(false));
}

#[test]
fn map2d_rejects_space_curves_and_rectangular_grids() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "t.json", r#"{"dimension": 3, "builtin": "tilted_circle"}"#);
    let o = plateau(&["map2d", "--contour", &spec, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let circle = write(dir.path(), "c.json", CIRCLE);
    let o = plateau(&["map2d", "--contour", &circle, "--out", "unused", "--grid", "8x9"]);
    assert_eq!(code(&o), 1);
    let o = plateau(&["solve", "--contour", &circle]);
    assert_eq!(code(&o), 1, "missing --out is a usage error");
}

fn ring(dir: &Path, name: &str, z: f64) -> String {
    write(
        dir,
        name,
        &format!(r#"{{"dimension": 3, "builtin": "circle", "params": {{"cz": {z}}}, "config": {{"nodes": 128}}}}"#),
    )
}

#[test]
fn distant_rings_end_at_the_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (ring(dir.path(), "a.json", 0.8), ring(dir.path(), "b.json", -0.8));
    let out = dir.path().join("out");
    let o = plateau(&["annulus", "--contour1", &a, "--contour2", &b, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("advisory"));
    let report = json(out.join("report.json"));
    assert_eq!(report["status"], "modulus_at_bracket_end");
    let trace = std::fs::read_to_string(out.join("modulus_trace.csv")).unwrap();
    assert!(trace.starts_with("rho,energy,"));
    assert_eq!(trace.lines().count(), 1 + 12);
}

#[test]
fn near_rings_span_a_catenoid() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (ring(dir.path(), "a.json", 0.4), ring(dir.path(), "b.json", -0.4));
    let out = dir.path().join("out");
    let o = plateau(&[
        "annulus",
        "--contour1",
        &a,
        "--contour2",
        &b,
        "--out",
        out.to_str().unwrap(),
        "--modulus-bracket",
        "0.2,0.8",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(out.join("report.json"));
    assert_eq!(report["config"]["modulus_bracket"][0], 0.2);
    assert!((report["area"].as_f64().unwrap() - 4.8838).abs() < 1e-3);
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    for f in manifest["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn bad_thread_variable_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "circle.json", CIRCLE);
    let o = Command::new(env!("CARGO_BIN_EXE_plateau"))
        .env("PLATEAU_THREADS", "many")
        .args(["solve", "--contour", &spec, "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("PLATEAU_THREADS"));
}
