use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphdiff::experiments::{compare_runs, RunSummary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphdiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const LOCAL: &str = "\
experiment: local
vertices: [o]
edges:
  - {from: o, length: inf}
  - {from: o, length: inf}
  - {from: o, length: inf}
grid: {h: 0.05, L_trunc: 20}
initial: {kind: bump, edge: 1, center: 1.5, width: 0.5}
time: {T: 1, dt: 0.001, scheme: crank_nicolson}
observe:
  times: [0, 0.5, 1]
  snapshots: true
";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_suite_passes_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check");
    let o = run(&["check", "--out", path_str(&out), "--seed", "5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().count() > 50);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    let (summary, _) = RunSummary::read(&out).unwrap();
    assert!(summary.all_passed);
    assert_eq!(summary.kind, "check");
    assert!(summary.checks.iter().any(|c| c.name.starts_with("nonlocal_weighted_symmetry")));
}

#[test]
fn local_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "star.yaml", LOCAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run(&["local", path_str(&scenario), "--out", path_str(&a)]);
    let ob = run(&["local", path_str(&scenario), "--out", path_str(&b), "--jobs", "1"]);
    assert!(oa.status.success(), "{}{}", stdout(&oa), stderr(&oa));
    assert!(ob.status.success());

    let (sa, _) = RunSummary::read(&a).unwrap();
    let (sb, _) = RunSummary::read(&b).unwrap();
    assert_eq!(sa.scenario_hash, sb.scenario_hash);
    assert_eq!(sa.csv.len(), 4, "local.csv and three snapshots");
    for (ca, cb) in sa.csv.iter().zip(&sb.csv) {
        assert_eq!(ca.name, cb.name);
        let (ta, tb) = (std::fs::read(&ca.path).unwrap(), std::fs::read(&cb.path).unwrap());
        assert_eq!(ta, tb, "{} differs", ca.name);
        let gp = a.join(ca.name.replace(".csv", ".gp"));
        assert!(gp.exists(), "missing plot script for {}", ca.name);
    }
    let header = std::fs::read_to_string(a.join("local.csv")).unwrap();
    assert!(header.starts_with("t,mass,l1,l2,linf,grad_l2\n"), "{header}");
    let snap = std::fs::read_to_string(a.join("u_t0.5.csv")).unwrap();
    assert!(snap.starts_with("edge,x,u\n"));

    let report = compare_runs(&a, &b).unwrap();
    assert!(!report.columns.is_empty());
    assert!(report.columns.iter().all(|c| c.max_abs_diff == 0.0));
    let o = run(&["compare", path_str(&a), path_str(&b)]);
    assert!(o.status.success());
}

#[test]
fn invalid_scenarios_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let long = LOCAL.replace("L_trunc: 20", "L_trunc: 100").replace("T: 1,", "T: 400,");
    let p = write(dir.path(), "long.yaml", &long);
    let o = run(&["local", path_str(&p), "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("L_trunc") && err.contains("line 7"), "{err}");

    let p = write(dir.path(), "kind.yaml", &LOCAL.replace("experiment: local", "experiment: wave"));
    let o = run(&["local", path_str(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment"), "{}", stderr(&o));

    let p = write(dir.path(), "key.yaml", &format!("{LOCAL}colour: blue\n"));
    let o = run(&["local", path_str(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn failing_checks_exit_with_code_one() {
    // coarse Crank–Nicolson steps on a rough datum violate the energy balance
    let dir = tempfile::tempdir().unwrap();
    let rough = LOCAL
        .replace("dt: 0.001", "dt: 0.1")
        .replace("width: 0.5", "width: 0.1");
    let p = write(dir.path(), "rough.yaml", &rough);
    let o = run(&["local", path_str(&p), "--out", path_str(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL energy_identity"));
}

#[test]
fn distance_subcommand_prints_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
vertices: [a, b]
edges:
  - {from: a, to: b, length: 1}
  - {from: a, to: b, length: 3}
  - {from: b, length: inf}
";
    let p = write(dir.path(), "g.yaml", text);
    let out = dir.path().join("d");
    let o = run(&["distance", path_str(&p), "--from", "1:0.5", "--to", "2:2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("1:0.5,2:2,3.5000000000000000e0"), "{s}");
    let o = run(&["distance", path_str(&p), "--from", "1:0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_overrides_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
vertices: [o]
edges:
  - {from: o, length: inf}
  - {from: o, length: inf}
  - {from: o, length: inf}
grid: {h: 0.05, L_trunc: 60}
initial: {kind: bump, edge: 0, center: 2, width: 0.5}
time: {dt: 0.05, scheme: implicit_euler}
";
    let p = write(dir.path(), "p.yaml", text);
    let out = dir.path().join("p");
    let o = run(&["profile", path_str(&p), "--times", "5,10,20", "--p", "1,inf", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(out.join("profile_errors.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,p,err_infinite_part,err_finite_part");
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(rows.iter().any(|r| r.contains(",inf,")));
}
