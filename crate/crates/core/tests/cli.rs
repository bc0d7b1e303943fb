use std::process::Command;

fn ncstokes(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ncstokes")).args(args).output().expect("binary runs")
}

#[test]
fn mesh_reports_counts_and_writes_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("cube.vtk");
    let out = ncstokes(&["mesh", "--n", "2", "--vtk", vtk.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tets"], 48);
    assert_eq!(report["interior_faces"], 72);
    let text = std::fs::read_to_string(vtk).unwrap();
    assert!(text.contains("CELLS 48 240"));
}

#[test]
fn mesh_rejects_zero_cells() {
    let out = ncstokes(&["mesh", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_suites_pass_and_print_json() {
    for suite in ["dofs", "jumps", "unisolvence"] {
        let out = ncstokes(&["verify", "--suite", suite]);
        assert!(out.status.success(), "{suite}");
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["passed"], true);
        assert!(report["failures"].as_array().unwrap().is_empty());
    }
}

#[test]
fn infsup_suite_rejects_large_levels() {
    let out = ncstokes(&["verify", "--suite", "infsup", "--level", "4"]);
    assert!(!out.status.success());
}

#[test]
fn level_five_needs_opt_in() {
    let out = ncstokes(&["solve", "--level", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncstokes(&["convergence", "--max-level", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    for tag in ["a", "b"] {
        let out = ncstokes(&[
            "convergence",
            "--max-level",
            "2",
            "--csv",
            &p(&format!("{tag}.csv")),
            "--json",
            &p(&format!("{tag}.json")),
        ]);
        assert!(out.status.success());
    }
    for ext in ["csv", "json"] {
        let a = std::fs::read(p(&format!("a.{ext}"))).unwrap();
        let b = std::fs::read(p(&format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext}");
    }
    let csv = std::fs::read_to_string(p("a.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "level,h,l2_velocity,rate_l2_velocity,h1_broken,rate_h1_broken,l2_pressure,rate_l2_pressure"
    );
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn solve_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("solve.json");
    let out = ncstokes(&["solve", "--level", "2", "--quad-degree", "12", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(v["level"], 2);
    assert!(v["errors"]["l2_velocity"].as_f64().unwrap() > 0.0);
}

#[test]
fn infsup_command_prints_one_record_per_level() {
    let out = ncstokes(&["infsup", "--max-level", "2"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|v| v["beta"].as_f64().unwrap() > 0.0));
}
