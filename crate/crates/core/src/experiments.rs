//! Experiment pipelines behind the CLI: run a scenario, write CSV tables,
//! a gnuplot script per table and a `summary.toml` with the verdict of every
//! enabled invariant check.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{fit_decay_exponent, log_spaced, profile_function, weighted_error, ProfileParams};
use crate::error::{Error, Result};
use crate::function::GraphFunction;
use crate::graph::{GraphPoint, MetricGraph};
use crate::grid::Grid;
use crate::kernels::Kernel;
use crate::local::{discrete_energy_identity, solve_heat, HeatRun, Observe, Scheme};
use crate::nonlocal::{assemble_nonlocal, relaxation_sweep, solve_nonlocal, NonlocalRun, NonlocalScheme};
use crate::scenario::{Exponent, ExperimentKind, Quantity, Scenario, Solver};

pub const SUMMARY_FILE: &str = "summary.toml";

/// Tolerance on `|M(T) − M(0)|/|M(0)|`.
pub const MASS_RTOL: f64 = 1e-10;
/// Allowed relative growth of a norm between observations.
pub const MONOTONE_RTOL: f64 = 1e-10;
/// Slack on `t·𝓔(u(t)) ≤ ‖u₀‖²`.
pub const ENERGY_BOUND_SLACK: f64 = 0.05;
/// Allowed `|2∫‖u_x‖² − (‖u₀‖² − ‖u(T)‖²)| / ‖u₀‖²` for Crank–Nicolson runs.
pub const ENERGY_IDENTITY_RTOL: f64 = 1e-3;
pub const LOCAL_SLOPE_TOL: f64 = 0.05;
pub const NONLOCAL_SLOPE_TOL: f64 = 0.07;

/// Command-line overrides of scenario fields.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub profile_times: Option<Vec<f64>>,
    pub p: Option<Vec<Exponent>>,
    pub eps: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed: passed && !residual.is_nan(),
            residual,
        }
    }

    /// Passes when `residual <= tol`.
    pub fn at_most(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self::new(name, residual, residual <= tol)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} (residual {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.residual
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvFile {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_hash: String,
    pub kind: String,
    pub wall_clock_seconds: f64,
    pub all_passed: bool,
    #[serde(default)]
    pub csv: Vec<CsvFile>,
    #[serde(default)]
    pub checks: Vec<CheckResult>,
}

impl RunSummary {
    pub fn read(path: &Path) -> Result<(RunSummary, PathBuf)> {
        let file = if path.is_dir() { path.join(SUMMARY_FILE) } else { path.to_path_buf() };
        let text =
            std::fs::read_to_string(&file).map_err(|e| Error::io(format!("reading {}", file.display()), e))?;
        let summary = toml::from_str(&text).map_err(|e| Error::Compare(format!("{}: {e}", file.display())))?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((summary, dir))
    }

    /// Writes `summary.toml` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let text = toml::to_string(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let path = dir.join(SUMMARY_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects CSV tables and checks while a pipeline runs.
struct Output {
    dir: PathBuf,
    csv: Vec<CsvFile>,
    checks: Vec<CheckResult>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir,
            csv: Vec::new(),
            checks: Vec::new(),
        })
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let ctx = |e: csv::Error| Error::io(format!("writing {}", path.display()), e.into());
        let mut w = csv::Writer::from_path(&path).map_err(ctx)?;
        w.write_record(header).map_err(ctx)?;
        for row in rows {
            w.write_record(&row).map_err(ctx)?;
        }
        w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.plot_script(name, header)?;
        self.csv.push(CsvFile {
            name: name.to_string(),
            path,
        });
        Ok(())
    }

    fn plot_script(&self, name: &str, header: &[&str]) -> Result<()> {
        let stem = name.trim_end_matches(".csv");
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{stem}.png'\n"));
        s.push_str(&format!("set xlabel '{}'\nset key outside\n", header[0]));
        let (x, first) = if header.len() >= 3 && header[0] == "edge" { (2, 3) } else { (1, 2) };
        if header[0] == "edge" {
            s.push_str("set xlabel 'x'\n");
        }
        let series: Vec<String> = (first..=header.len())
            .map(|c| {
                format!(
                    "'{name}' using {x}:{c} with linespoints title '{}'",
                    header[c - 1]
                )
            })
            .collect();
        s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
        let path = self.dir.join(format!("{stem}.gp"));
        std::fs::write(&path, s).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    fn snapshot(&mut self, t: f64, u: &GraphFunction) -> Result<()> {
        let grid = u.grid();
        let rows = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                vec![p.edge.0.to_string(), num(p.coord), num(u.values()[i])]
            })
            .collect();
        self.table(&format!("u_t{t}.csv"), &["edge", "x", "u"], rows)
    }

    fn check(&mut self, c: CheckResult) {
        self.checks.push(c);
    }
}

/// Writes the command-line overrides in `opts` into `s`.
pub fn apply_overrides(s: &mut Scenario, opts: &RunOptions) {
    let kind = s.kind();
    if kind == ExperimentKind::Profile {
        let p = s.profile.get_or_insert_with(Default::default);
        if let Some(t) = &opts.profile_times {
            p.times = t.clone();
        }
        if let Some(ps) = &opts.p {
            p.p = ps.clone();
        }
    }
    if kind == ExperimentKind::Decay {
        let d = s.decay.get_or_insert_with(Default::default);
        if let Some(ps) = &opts.p {
            d.p = ps.clone();
        }
    }
    if kind == ExperimentKind::Relax {
        let r = s.relax.get_or_insert_with(Default::default);
        if let Some(eps) = &opts.eps {
            r.eps = eps.clone();
        }
    }
    if let Some(out) = &opts.out {
        s.out = Some(out.clone());
    }
}

/// Runs the experiment a scenario describes, with command-line overrides.
pub fn run_experiment(s: &Scenario, opts: &RunOptions) -> Result<RunSummary> {
    let mut s = s.clone();
    apply_overrides(&mut s, opts);
    // overrides may change the horizon or the kernel resolution; re-check
    let text = serde_yaml::to_string(&s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let s = crate::scenario::parse_scenario_str(&text, Path::new("<scenario with overrides>"))?;

    let run = || -> Result<RunSummary> {
        let start = Instant::now();
        let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut out = Output::new(dir.clone())?;
        let g = s.build_graph()?;
        match s.kind() {
            ExperimentKind::Local => run_local(&s, &g, &mut out)?,
            ExperimentKind::Nonlocal => run_nonlocal(&s, &g, &mut out)?,
            ExperimentKind::Decay => run_decay(&s, &g, &mut out)?,
            ExperimentKind::Profile => run_profile(&s, &g, &mut out)?,
            ExperimentKind::Relax => run_relax(&s, &g, &mut out)?,
            ExperimentKind::Distance => run_distance(&s, &g, &mut out)?,
        }
        let summary = RunSummary {
            scenario_hash: s.hash(),
            kind: s.kind().to_string(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            all_passed: out.checks.iter().all(|c| c.passed),
            csv: out.csv,
            checks: out.checks,
        };
        summary.write(&dir)?;
        Ok(summary)
    };
    match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn kernel_and_epsilon(s: &Scenario) -> Result<(Kernel, f64)> {
    let k = s
        .build_kernel()?
        .ok_or_else(|| Error::InvalidParameter("scenario has no kernel".into()))?;
    Ok((k, s.epsilon.unwrap_or(1.0)))
}

/// Largest relative increase between consecutive entries.
fn max_rel_increase(values: &[f64]) -> f64 {
    let scale = values.first().map_or(1.0, |v| v.abs()).max(f64::MIN_POSITIVE);
    values
        .windows(2)
        .map(|w| (w[1] - w[0]) / scale)
        .fold(0.0, f64::max)
}

fn mass_drift(m0: f64, m: f64) -> f64 {
    if m0 == 0.0 {
        (m - m0).abs()
    } else {
        ((m - m0) / m0).abs()
    }
}

fn monotone_checks(out: &mut Output, prefix: &str, l1: &[f64], l2: &[f64], linf: &[f64]) {
    for (name, series) in [("l1", l1), ("l2", l2), ("linf", linf)] {
        out.check(CheckResult::at_most(
            format!("{prefix}_{name}_nonincreasing"),
            max_rel_increase(series),
            MONOTONE_RTOL,
        ));
    }
}

fn range(u: &GraphFunction) -> (f64, f64) {
    u.values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn heat_run(s: &Scenario, g: &MetricGraph, grid: Arc<Grid>, u0: &GraphFunction, t_final: f64, times: Vec<f64>) -> Result<HeatRun> {
    let scheme = s.local_scheme()?;
    let observe = Observe {
        times,
        snapshots: true,
        gradient_history: scheme == Scheme::CrankNicolson,
    };
    solve_heat(g, grid, u0, t_final, s.dt(), scheme, &observe)
}

fn nonlocal_run(
    s: &Scenario,
    g: &MetricGraph,
    grid: Arc<Grid>,
    u0: &GraphFunction,
    t_final: f64,
    times: Vec<f64>,
) -> Result<(NonlocalRun, f64)> {
    let (k, eps) = kernel_and_epsilon(s)?;
    let op = assemble_nonlocal(g, grid, &k, eps)?;
    let observe = Observe {
        times,
        snapshots: true,
        gradient_history: true,
    };
    let run = solve_nonlocal(g, &op, u0, t_final, s.dt(), s.nonlocal_scheme()?, &observe)?;
    Ok((run, op.max_diagonal()))
}

fn quantity_columns(s: &Scenario) -> Vec<Quantity> {
    s.observe.quantities.clone()
}

fn run_local(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let grid = s.build_grid(g)?;
    let u0 = s.initial_datum(grid.clone())?;
    let run = heat_run(s, g, grid, &u0, s.t_final(), s.observe.times.clone())?;

    let cols = quantity_columns(s);
    let mut header = vec!["t"];
    header.extend(cols.iter().map(|q| q.column()));
    let rows = run
        .records
        .iter()
        .map(|r| {
            let mut row = vec![num(r.t)];
            row.extend(cols.iter().map(|q| {
                num(match q {
                    Quantity::Mass => r.mass,
                    Quantity::L1 => r.l1,
                    Quantity::L2 => r.l2,
                    Quantity::Linf => r.linf,
                    Quantity::GradL2 => r.grad_l2,
                    Quantity::Energy => f64::NAN,
                })
            }));
            row
        })
        .collect();
    out.table("local.csv", &header, rows)?;
    if s.observe.snapshots {
        for (t, u) in &run.snapshots {
            out.snapshot(*t, u)?;
        }
    }

    let m0 = u0.integrate();
    out.check(CheckResult::at_most(
        "mass_conservation",
        mass_drift(m0, run.final_state.u.integrate()),
        MASS_RTOL,
    ));
    let series = |f: fn(&crate::local::HeatRecord) -> f64| run.records.iter().map(f).collect::<Vec<_>>();
    monotone_checks(out, "local", &series(|r| r.l1), &series(|r| r.l2), &series(|r| r.linf));
    if run.scheme == Scheme::ImplicitEuler {
        let (lo, hi) = range(&u0);
        let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let violation = run
            .snapshots
            .iter()
            .map(|(_, u)| {
                let (a, b) = range(u);
                (lo - a).max(b - hi).max(0.0)
            })
            .fold(0.0, f64::max);
        out.check(CheckResult::at_most("maximum_principle", violation, tol));
    }
    if run.gradient_history.is_some() {
        let r = discrete_energy_identity(&run)?;
        let scale = run.initial_l2_sq.max(f64::MIN_POSITIVE);
        out.check(CheckResult::at_most("energy_identity", r / scale, ENERGY_IDENTITY_RTOL));
    }
    Ok(())
}

fn run_nonlocal(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let grid = s.build_grid(g)?;
    let u0 = s.initial_datum(grid.clone())?;
    let (run, max_d) = nonlocal_run(s, g, grid, &u0, s.t_final(), s.observe.times.clone())?;

    let cols = quantity_columns(s);
    let mut header = vec!["t"];
    header.extend(cols.iter().map(|q| q.column()));
    let rows = run
        .records
        .iter()
        .map(|r| {
            let mut row = vec![num(r.t)];
            row.extend(cols.iter().map(|q| {
                num(match q {
                    Quantity::Mass => r.mass,
                    Quantity::L1 => r.l1,
                    Quantity::L2 => r.l2,
                    Quantity::Linf => r.linf,
                    Quantity::Energy => r.energy,
                    Quantity::GradL2 => f64::NAN,
                })
            }));
            row
        })
        .collect();
    out.table("nonlocal.csv", &header, rows)?;
    if s.observe.snapshots {
        for (t, u) in &run.snapshots {
            out.snapshot(*t, u)?;
        }
    }

    let m0 = u0.integrate();
    out.check(CheckResult::at_most(
        "mass_conservation",
        mass_drift(m0, run.final_state.u.integrate()),
        MASS_RTOL,
    ));
    let series = |f: fn(&crate::nonlocal::NonlocalRecord) -> f64| run.records.iter().map(f).collect::<Vec<_>>();
    monotone_checks(out, "nonlocal", &series(|r| r.l1), &series(|r| r.l2), &series(|r| r.linf));
    let u2 = run.initial_l2_sq.max(f64::MIN_POSITIVE);
    let min_energy = run.records.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    out.check(CheckResult::new("energy_nonnegative", -min_energy.min(0.0), min_energy >= 0.0));
    let bound = run
        .records
        .iter()
        .filter(|r| r.t >= 1.0 - 1e-12)
        .map(|r| r.t * r.energy / u2)
        .fold(0.0, f64::max);
    out.check(CheckResult::at_most("energy_time_bound", bound, 1.0 + ENERGY_BOUND_SLACK));
    // implicit Euler dissipates an extra Σ‖u_{n+1} − u_n‖² ≤ dt·max D·‖u₀‖²
    let residual = run.energy_residual()? / u2;
    out.check(CheckResult::at_most("energy_identity", residual, run.dt * max_d));
    if run.scheme == NonlocalScheme::ExplicitEuler && range(&u0).0 >= 0.0 {
        let lowest = run.snapshots.iter().map(|(_, u)| range(u).0).fold(0.0, f64::min);
        out.check(CheckResult::new("positivity", -lowest, lowest >= 0.0));
    }
    Ok(())
}

fn expected_slope(p: f64) -> f64 {
    if p.is_infinite() {
        -0.5
    } else {
        0.5 * (1.0 / p - 1.0)
    }
}

fn run_decay(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let d = s.decay.clone().unwrap_or_default();
    let grid = s.build_grid(g)?;
    let u0 = s.initial_datum(grid.clone())?;
    let times = log_spaced(d.window[0], d.window[1], d.samples);
    let snapshots: Vec<(f64, GraphFunction)> = match d.solver {
        Solver::Local => heat_run(s, g, grid, &u0, d.window[1], times)?.snapshots,
        Solver::Nonlocal => nonlocal_run(s, g, grid, &u0, d.window[1], times)?.0.snapshots,
    };
    let ts: Vec<f64> = snapshots.iter().map(|(t, _)| *t).collect();
    let tol = match d.solver {
        Solver::Local => LOCAL_SLOPE_TOL,
        Solver::Nonlocal => NONLOCAL_SLOPE_TOL,
    };

    let mut norms = Vec::with_capacity(d.p.len());
    for p in &d.p {
        let series = snapshots
            .iter()
            .map(|(_, u)| u.lp_norm(p.0))
            .collect::<Result<Vec<f64>>>()?;
        norms.push(series);
    }
    let mut header_owned = vec!["t".to_string()];
    header_owned.extend(d.p.iter().map(|p| format!("l{p}")));
    let header: Vec<&str> = header_owned.iter().map(String::as_str).collect();
    let rows = (0..ts.len())
        .map(|k| {
            let mut row = vec![num(ts[k])];
            row.extend(norms.iter().map(|n| num(n[k])));
            row
        })
        .collect();
    out.table("decay_norms.csv", &header, rows)?;

    let mut rows = Vec::new();
    for (p, series) in d.p.iter().zip(&norms) {
        let slope = fit_decay_exponent(&ts, series)?;
        let expected = expected_slope(p.0);
        rows.push(vec![p.to_string(), num(slope), num(expected)]);
        out.check(CheckResult::at_most(format!("decay_slope_p{p}"), (slope - expected).abs(), tol));
        if p.0 == 1.0 {
            out.check(CheckResult::at_most("l1_nonincreasing", max_rel_increase(series), MONOTONE_RTOL));
        }
    }
    out.table("decay.csv", &["p", "fitted_slope", "expected_slope"], rows)?;
    Ok(())
}

/// Largest ratio between consecutive entries; below 1 iff strictly decreasing.
fn max_ratio(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

fn run_profile(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let spec = s.profile.clone().unwrap_or_default();
    let grid = s.build_grid(g)?;
    let u0 = s.initial_datum(grid.clone())?;
    let mut times = spec.times.clone();
    times.sort_by(f64::total_cmp);
    let horizon = *times.last().expect("validated nonempty");
    let (snapshots, a) = match spec.solver {
        Solver::Local => (heat_run(s, g, grid.clone(), &u0, horizon, times)?.snapshots, 1.0),
        Solver::Nonlocal => {
            let a = kernel_and_epsilon(s)?.0.second_moment_half();
            (nonlocal_run(s, g, grid.clone(), &u0, horizon, times)?.0.snapshots, a)
        }
    };
    let params = ProfileParams::for_graph(g, u0.integrate(), a)?;

    let mut rows = Vec::new();
    let mut errors: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (t, u) in &snapshots {
        let profile = profile_function(g, grid.clone(), &params, *t)?;
        for p in &spec.p {
            let (ei, ef) = weighted_error(u, &profile, *t, p.0)?;
            rows.push(vec![num(*t), p.to_string(), num(ei), num(ef)]);
            let e = errors.entry(p.to_string()).or_default();
            e.0.push(ei);
            e.1.push(ef);
        }
    }
    out.table("profile_errors.csv", &["t", "p", "err_infinite_part", "err_finite_part"], rows)?;
    if snapshots.len() >= 2 {
        for (p, (ei, ef)) in &errors {
            let r = max_ratio(ei);
            out.check(CheckResult::new(format!("profile_infinite_part_decreasing_p{p}"), r, r < 1.0));
            if g.has_finite_part() {
                let r = max_ratio(ef);
                out.check(CheckResult::new(format!("profile_finite_part_decreasing_p{p}"), r, r < 1.0));
            }
        }
    }
    Ok(())
}

fn run_relax(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let spec = s.relax.clone().unwrap_or_default();
    let (k, _) = kernel_and_epsilon(s)?;
    let grid = s.build_grid(g)?;
    let u0 = s.initial_datum(grid.clone())?;
    let mut eps = spec.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let table = relaxation_sweep(g, grid, &k, &u0, s.t_final(), s.dt(), &eps)?;
    let rows = table
        .iter()
        .map(|r| vec![num(r.epsilon), num(r.space_time_l2_error)])
        .collect();
    out.table("relax.csv", &["epsilon", "space_time_l2_error"], rows)?;
    let errs: Vec<f64> = table.iter().map(|r| r.space_time_l2_error).collect();
    if errs.len() >= 2 {
        let r = max_ratio(&errs);
        out.check(CheckResult::new("relax_error_decreasing", r, r < 1.0));
    }
    Ok(())
}

fn run_distance(s: &Scenario, g: &MetricGraph, out: &mut Output) -> Result<()> {
    let pairs = s.distance.clone().unwrap_or_default().pairs;
    let mut rows = Vec::new();
    let mut asym: f64 = 0.0;
    for [a, b] in &pairs {
        let x: GraphPoint = a.parse()?;
        let y: GraphPoint = b.parse()?;
        let d = g.graph_distance(x, y)?;
        asym = asym.max((d - g.graph_distance(y, x)?).abs());
        rows.push(vec![a.clone(), b.clone(), num(d)]);
    }
    out.table("distance.csv", &["from", "to", "distance"], rows)?;
    out.check(CheckResult::at_most("distance_symmetric", asym, 0.0));
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDiff {
    pub csv: String,
    pub column: String,
    pub max_abs_diff: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompareReport {
    pub columns: Vec<ColumnDiff>,
    /// Tables present in both runs that could not be aligned row by row.
    pub skipped: Vec<String>,
}

impl CompareReport {
    pub fn max_diff(&self, csv: &str, column: &str) -> Option<f64> {
        self.columns
            .iter()
            .find(|c| c.csv == csv && c.column == column)
            .map(|c| c.max_abs_diff)
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "csv,column,max_abs_diff")?;
        for c in &self.columns {
            writeln!(f, "{},{},{}", c.csv, c.column, num(c.max_abs_diff))?;
        }
        for s in &self.skipped {
            writeln!(f, "# skipped {s}: row counts differ")?;
        }
        Ok(())
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let ctx = |e: csv::Error| Error::Compare(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(ctx)?;
    let header = r.headers().map_err(ctx)?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(ctx)?;
    Ok(Table { header, rows })
}

fn parse_num(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// Per-column maximum absolute difference between the tables two runs have
/// in common.
///
/// Snapshot tables (`edge,x,u`) from runs on different grids are compared by
/// interpolating the second run linearly onto the points of the first.
pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport> {
    let (sa, da) = RunSummary::read(a)?;
    let (sb, db) = RunSummary::read(b)?;
    if sa.kind != sb.kind {
        return Err(Error::Compare(format!("experiment kinds differ: {} vs {}", sa.kind, sb.kind)));
    }
    let mut report = CompareReport::default();
    for fa in &sa.csv {
        let Some(fb) = sb.csv.iter().find(|f| f.name == fa.name) else {
            continue;
        };
        let ta = read_table(&da.join(&fa.name))?;
        let tb = read_table(&db.join(&fb.name))?;
        if ta.header != tb.header {
            return Err(Error::Compare(format!(
                "{}: columns differ ({} vs {})",
                fa.name,
                ta.header.join(","),
                tb.header.join(",")
            )));
        }
        if ta.rows.len() == tb.rows.len() {
            for (c, col) in ta.header.iter().enumerate() {
                let mut worst: f64 = 0.0;
                let mut numeric = true;
                for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
                    match (parse_num(&ra[c]), parse_num(&rb[c])) {
                        (Some(x), Some(y)) => {
                            let d = (x - y).abs();
                            worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
                        }
                        _ => {
                            numeric = false;
                            if ra[c] != rb[c] {
                                return Err(Error::Compare(format!("{}: column {col} differs", fa.name)));
                            }
                        }
                    }
                }
                if numeric {
                    report.columns.push(ColumnDiff {
                        csv: fa.name.clone(),
                        column: col.clone(),
                        max_abs_diff: worst,
                    });
                }
            }
        } else if ta.header == ["edge", "x", "u"] {
            let diff = snapshot_diff(&ta, &tb)
                .ok_or_else(|| Error::Compare(format!("{}: malformed snapshot", fa.name)))?;
            report.columns.push(ColumnDiff {
                csv: fa.name.clone(),
                column: "u".into(),
                max_abs_diff: diff,
            });
        } else {
            report.skipped.push(fa.name.clone());
        }
    }
    Ok(report)
}

fn snapshot_diff(a: &Table, b: &Table) -> Option<f64> {
    let mut by_edge: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &b.rows {
        by_edge
            .entry(r[0].parse().ok()?)
            .or_default()
            .push((parse_num(&r[1])?, parse_num(&r[2])?));
    }
    let mut worst: f64 = 0.0;
    for r in &a.rows {
        let pts = by_edge.get(&r[0].parse().ok()?)?;
        let (x, u) = (parse_num(&r[1])?, parse_num(&r[2])?);
        let k = pts.partition_point(|p| p.0 < x);
        let v = if k == 0 {
            pts[0].1
        } else if k == pts.len() {
            pts[k - 1].1
        } else {
            let (x0, u0) = pts[k - 1];
            let (x1, u1) = pts[k];
            u0 + (u1 - u0) * (x - x0) / (x1 - x0)
        };
        worst = worst.max((u - v).abs());
    }
    Some(worst)
}
