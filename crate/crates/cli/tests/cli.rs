use std::path::Path;
use std::process::{Command, Output};

fn gedamage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gedamage"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn box_config(extra_load: &str, extra_solver: &str) -> String {
    format!(
        r#"{{
  "geometry": {{"kind": "box", "dimensions": [2.0, 1.0, 1.0], "divisions": [2, 1, 1]}},
  "material": {{"youngs_modulus": 500, "poisson_ratio": 0.3, "dissipation": 5.0, "beta": 10,
               "critical_damage": 0.95}},
  "load": {{"target": 0.6, "increment": 0.1{extra_load}}},
  "solver": {{{extra_solver}}},
  "output": {{"snapshot_every": 2}}
}}"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_curve_snapshots_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", &box_config("", ""));
    let out_dir = dir.path().join("out");
    let out = gedamage(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let curve = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "step,u_star_mm,reaction_N,max_D,eroded_count,newton_iters,jacobi_sweeps,wall_s");
    assert_eq!(lines.len(), 7);
    for step in [2, 4, 6] {
        assert!(out_dir.join(format!("snapshot_{step:05}.vtk")).exists());
    }
    assert!(!out_dir.join("snapshot_00001.vtk").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "completed");
    assert_eq!(summary["summary"]["steps"], 6);
}

#[test]
fn repeated_runs_are_identical_except_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", &box_config("", ""));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = gedamage(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("curve.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
    for name in ["snapshot_00006.vtk", "run.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn invalid_poisson_ratio_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &box_config("", "").replace("0.3", "0.6"));
    let out = gedamage(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error[config]"), "{err}");
    assert!(err.contains("material.poisson_ratio"), "{err}");
}

#[test]
fn missing_fields_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", "{}");
    let out = gedamage(&["mesh-info", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("geometry.kind") && err.contains("load.increment"), "{err}");
}

#[test]
fn missing_config_file() {
    let out = gedamage(&["mesh-info", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[config]"));
}

#[test]
fn newton_failure_aborts_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    // 40 mm per step on the plate: the first step converges, the second does not
    let text = r#"{"geometry": {"kind": "plate_with_hole"},
        "material": {"youngs_modulus": 500, "poisson_ratio": 0.3, "dissipation": 5.0, "beta": 100, "critical_damage": 0.95},
        "load": {"target": 400.0, "increment": 40.0}, "output": {"snapshot_every": 0}}"#;
    let cfg = write(dir.path(), "run.json", text);
    let out_dir = dir.path().join("out");
    let out = gedamage(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error[newton_diverged]") || err.starts_with("error[inverted_element]"), "{err}");
    let curve = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert!(curve.starts_with("step,u_star_mm"));
    let rows = curve.lines().count() - 1;
    assert!(rows >= 1, "no converged step before the failure");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "aborted");
    assert_eq!(summary["last_converged_step"].as_u64().unwrap_or(0) as usize, rows);
    if rows > 0 {
        assert!(out_dir.join("snapshot_last_converged.vtk").exists());
    }
}

#[test]
fn verify_passes() {
    let out = gedamage(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    for suite in ["quadratic-laplacian", "stress-fd", "tangent-fd", "patch-test", "homogeneous-damage"] {
        assert!(text.lines().any(|l| l.starts_with(suite) && l.ends_with("PASS")), "{text}");
    }
}

#[test]
fn mesh_info_reports_plate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "plate.json",
        r#"{"geometry": {"kind": "plate_with_hole"},
            "material": {"youngs_modulus": 500, "poisson_ratio": 0.3, "dissipation": 5.0, "beta": 100, "critical_damage": 0.95},
            "load": {"target": 25, "increment": 0.025}}"#,
    );
    let out = gedamage(&["mesh-info", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("elements        400"), "{text}");
}

#[test]
fn shipped_configs_are_valid() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let out = gedamage(&["mesh-info", "--config", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
}
