use std::path::{Path, PathBuf};

use graphdiff::experiments::{compare_runs, run_experiment, RunOptions, RunSummary};
use graphdiff::scenario::parse_scenario_str;

const STAR: &str = "\
vertices: [o]
edges:
  - {from: o, length: inf}
  - {from: o, length: inf}
  - {from: o, length: inf}
";

fn run(text: &str, out: &Path) -> RunSummary {
    let s = parse_scenario_str(text, Path::new("test.yaml")).unwrap();
    let opts = RunOptions {
        out: Some(out.to_path_buf()),
        ..Default::default()
    };
    run_experiment(&s, &opts).unwrap()
}

fn local_text(h: f64, dt: f64) -> String {
    format!(
        "{STAR}grid: {{h: {h}, L_trunc: 12}}
initial: {{kind: bump, edge: 0, center: 1.5, width: 1.0}}
time: {{T: 0.5, dt: {dt}, scheme: crank_nicolson}}
observe: {{times: [0.25, 0.5], snapshots: true}}
"
    )
}

fn dirs(root: &Path, names: &[&str]) -> Vec<PathBuf> {
    names.iter().map(|n| root.join(n)).collect()
}

#[test]
fn space_refinement_is_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dirs(tmp.path(), &["h1", "h2", "h3"]);
    for (dir, h) in d.iter().zip([0.04, 0.02, 0.01]) {
        assert!(run(&local_text(h, 1e-3), dir).all_passed);
    }
    let diff = |a: &Path, b: &Path| {
        compare_runs(a, b)
            .unwrap()
            .max_diff("u_t0.5.csv", "u")
            .expect("snapshot compared")
    };
    let ratio = diff(&d[0], &d[1]) / diff(&d[1], &d[2]);
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
}

#[test]
fn time_refinement_is_second_order_for_crank_nicolson() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dirs(tmp.path(), &["t1", "t2", "t3"]);
    for (dir, dt) in d.iter().zip([0.02, 0.01, 0.005]) {
        run(&local_text(0.02, dt), dir);
    }
    let diff = |a: &Path, b: &Path| compare_runs(a, b).unwrap().max_diff("u_t0.5.csv", "u").unwrap();
    let ratio = diff(&d[0], &d[1]) / diff(&d[1], &d[2]);
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
}

#[test]
fn compare_rejects_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let local = tmp.path().join("local");
    run(&local_text(0.05, 0.01), &local);
    let dist = tmp.path().join("dist");
    run(
        &format!("experiment: distance\n{STAR}distance: {{pairs: [[\"0:1\", \"1:2\"]]}}\n"),
        &dist,
    );
    assert!(compare_runs(&local, &dist).is_err());

    let other = tmp.path().join("other");
    let text = local_text(0.05, 0.01).replace("observe: {", "observe: {quantities: [mass, l2], ");
    run(&text, &other);
    let err = compare_runs(&local, &other).unwrap_err().to_string();
    assert!(err.contains("local.csv"), "{err}");
}

#[test]
fn nonlocal_run_reports_its_invariants() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "\
experiment: nonlocal
vertices: [a, b]
edges:
  - {from: a, to: b, length: 1}
  - {from: a, to: b, length: 2}
  - {from: a, length: inf}
  - {from: b, length: inf}
  - {from: b, length: inf}
grid: {h: 0.05, L_trunc: 25}
initial: {kind: indicator, edge: 1, center: 1, width: 0.4}
kernel: {name: tent, normalize: true}
epsilon: 0.5
time: {T: 5, dt: 0.005, scheme: explicit_euler}
";
    let s = run(text, tmp.path());
    let names: Vec<&str> = s.checks.iter().map(|c| c.name.as_str()).collect();
    for n in [
        "mass_conservation",
        "nonlocal_l1_nonincreasing",
        "energy_nonnegative",
        "energy_time_bound",
        "energy_identity",
        "positivity",
    ] {
        assert!(names.contains(&n), "missing {n} in {names:?}");
    }
    assert!(s.all_passed, "{:?}", s.checks);
    let csv = std::fs::read_to_string(tmp.path().join("nonlocal.csv")).unwrap();
    assert!(csv.starts_with("t,mass,l1,l2,linf,energy\n"), "{csv}");
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn explicit_step_above_the_bound_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "experiment: nonlocal\n{STAR}grid: {{h: 0.05, L_trunc: 25}}
initial: {{kind: bump, edge: 0, center: 2, width: 0.5}}
kernel: {{name: tent, normalize: true}}
epsilon: 0.5
time: {{T: 1, dt: 0.5, scheme: explicit_euler}}
"
    );
    let s = parse_scenario_str(&text, Path::new("x.yaml")).unwrap();
    let err = run_experiment(
        &s,
        &RunOptions {
            out: Some(tmp.path().to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(err.to_string().contains("stability bound"), "{err}");
}

#[test]
fn relax_table_has_one_row_per_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "experiment: relax\n{STAR}grid: {{h: 0.02, L_trunc: 11}}
initial: {{kind: bump, edge: 0, center: 0.5, width: 0.5}}
kernel: {{name: tent, normalize: true}}
time: {{T: 0.5, dt: 0.005}}
relax: {{eps: [0.2, 0.4]}}
"
    );
    let s = run(&text, tmp.path());
    assert!(s.all_passed, "{:?}", s.checks);
    let csv = std::fs::read_to_string(tmp.path().join("relax.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "epsilon,space_time_l2_error");
    // sorted from large to small ε
    assert!(rows[1].starts_with("4.0000000000000002e-1"), "{}", rows[1]);
    assert_eq!(rows.len(), 3);
}

#[test]
fn hash_ignores_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(&local_text(0.1, 0.05), &tmp.path().join("a"));
    let b = run(&local_text(0.1, 0.05), &tmp.path().join("b"));
    let c = run(&local_text(0.1, 0.025), &tmp.path().join("c"));
    assert_eq!(a.scenario_hash, b.scenario_hash);
    assert_ne!(a.scenario_hash, c.scenario_hash);
    assert_eq!(a.scenario_hash.len(), 64);
}
