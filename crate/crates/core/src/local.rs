//! Finite-volume heat equation on a metric graph.
//!
//! Unknowns are cell averages. Inside an edge neighbouring cells exchange
//! the flux `(u_{k+1} − u_k)/h`. At a vertex all incident end cells share one
//! trace value `τ`, fixed by requiring the one-sided fluxes
//! `(τ − u_a)/(h_a/2)` to sum to zero (continuity plus Kirchhoff); `τ` is
//! eliminated, which leaves a symmetric coupling among the end cells. The
//! truncated far end of a ray is closed with zero flux.
//!
//! With cell measures `W`, the assembled `S = W·A` is symmetric, negative
//! semidefinite and annihilates constants, so `Σ_i w_i (A u)_i = 0` and
//! every step conserves the discrete mass.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::GraphFunction;
use crate::graph::{End, MetricGraph, VertexId};
use crate::grid::Grid;
use crate::linalg::{Cholesky, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

/// End cells meeting at one vertex with their half-cell conductances `2/h`.
#[derive(Clone, Debug)]
struct VertexStencil {
    cells: Vec<(usize, f64)>,
    total: f64,
}

impl VertexStencil {
    fn trace(&self, u: &[f64]) -> f64 {
        self.cells.iter().map(|&(i, c)| c * u[i]).sum::<f64>() / self.total
    }
}

#[derive(Clone, Debug)]
pub struct LocalOperator {
    grid: Arc<Grid>,
    weights: Vec<f64>,
    /// `S = W·A`
    stiffness: CsrMatrix,
    /// `A = W⁻¹·S`
    laplacian: CsrMatrix,
    vertices: Vec<VertexStencil>,
    faces: Vec<(usize, usize, f64)>,
    order: Vec<usize>,
}

pub fn assemble_local(g: &MetricGraph, grid: Arc<Grid>) -> Result<LocalOperator> {
    grid.check_matches(g)?;
    let n = grid.len();
    let weights = grid.weights();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut faces = Vec::new();
    let mut is_end = vec![false; n];

    for ec in grid.edges() {
        let conductance = 1.0 / ec.h;
        for k in ec.offset..ec.offset + ec.cells - 1 {
            faces.push((k, k + 1, conductance));
        }
    }
    for &(a, b, c) in &faces {
        rows[a].push((a, -c));
        rows[a].push((b, c));
        rows[b].push((b, -c));
        rows[b].push((a, c));
    }

    let mut vertices = Vec::with_capacity(g.num_vertices());
    for v in 0..g.num_vertices() {
        let cells: Vec<(usize, f64)> = g
            .incident(VertexId(v))
            .iter()
            .map(|&(e, end)| {
                let ec = grid.edge(e);
                let cell = match end {
                    End::Initial => ec.offset,
                    End::Terminal => ec.offset + ec.cells - 1,
                };
                (cell, 2.0 / ec.h)
            })
            .collect();
        let total: f64 = cells.iter().map(|&(_, c)| c).sum();
        for &(a, ca) in &cells {
            is_end[a] = true;
            rows[a].push((a, -ca));
            for &(b, cb) in &cells {
                rows[a].push((b, ca * cb / total));
            }
        }
        vertices.push(VertexStencil { cells, total });
    }

    let stiffness = CsrMatrix::from_rows(rows);
    let laplacian = CsrMatrix::from_rows(
        (0..n)
            .map(|i| stiffness.row(i).map(|(j, v)| (j, v / weights[i])).collect())
            .collect(),
    );

    // Chain interiors first, end cells last: eliminating a chain from one
    // side creates O(1) fill per cell.
    let mut order: Vec<usize> = (0..n).filter(|&i| !is_end[i]).collect();
    order.extend((0..n).filter(|&i| is_end[i]));

    Ok(LocalOperator {
        grid,
        weights,
        stiffness,
        laplacian,
        vertices,
        faces,
        order,
    })
}

impl LocalOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The discrete Laplacian `A` on cell values.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.laplacian
    }

    /// `W·A`, symmetric.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn apply(&self, u: &GraphFunction) -> Result<GraphFunction> {
        u.check_grid(&self.grid)?;
        GraphFunction::from_values(self.grid.clone(), self.laplacian.mul(u.values()))
    }

    /// Vertex values `τ_v` implied by the cell values.
    pub fn vertex_traces(&self, u: &GraphFunction) -> Vec<f64> {
        self.vertices.iter().map(|s| s.trace(u.values())).collect()
    }

    /// `‖u_x‖²_{L²(Γ)}` of the piecewise-linear reconstruction through cell
    /// centers and vertex traces; equals `−⟨Au, u⟩_W`.
    pub fn gradient_sq(&self, u: &[f64]) -> f64 {
        let interior: f64 = self
            .faces
            .iter()
            .map(|&(a, b, c)| c * (u[b] - u[a]).powi(2))
            .sum();
        let at_vertices: f64 = self
            .vertices
            .iter()
            .map(|s| {
                let tau = s.trace(u);
                s.cells.iter().map(|&(i, c)| c * (u[i] - tau).powi(2)).sum::<f64>()
            })
            .sum();
        interior + at_vertices
    }

    pub fn stepper(&self, dt: f64, scheme: Scheme) -> Result<LocalStepper<'_>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let theta = scheme.theta();
        let n = self.grid.len();
        let system = CsrMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let mut row: Vec<(usize, f64)> = self
                        .stiffness
                        .row(i)
                        .map(|(j, v)| (j, -theta * dt * v))
                        .collect();
                    row.push((i, self.weights[i]));
                    row
                })
                .collect(),
        );
        let factor = Cholesky::new(&system, &self.order)?;
        Ok(LocalStepper {
            op: self,
            dt,
            scheme,
            factor,
        })
    }
}

/// A factorized `W − θ·dt·S`, reused across steps.
pub struct LocalStepper<'a> {
    op: &'a LocalOperator,
    dt: f64,
    scheme: Scheme,
    factor: Cholesky,
}

impl LocalStepper<'_> {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances in increment form, `(W − θ dt S) δ = dt S u`, so the solve
    /// error enters the mass only through the (small) increment.
    pub fn advance(&self, u: &mut [f64]) {
        let mut rhs = self.op.stiffness.mul(u);
        for r in &mut rhs {
            *r *= self.dt;
        }
        let delta = self.factor.solve(&rhs);
        for (ui, di) in u.iter_mut().zip(delta) {
            *ui += di;
        }
    }

    pub fn step(&self, s: &mut HeatState) {
        self.advance(s.u.values_mut());
        s.t += self.dt;
    }
}

#[derive(Clone, Debug)]
pub struct HeatState {
    pub t: f64,
    pub u: GraphFunction,
    pub mass0: f64,
}

impl HeatState {
    pub fn new(u: GraphFunction) -> Self {
        let mass0 = u.integrate();
        Self { t: 0.0, u, mass0 }
    }
}

/// One step of size `dt` (factorizes on every call; use
/// [`LocalOperator::stepper`] for repeated steps).
pub fn step_local(op: &LocalOperator, s: &HeatState, dt: f64, scheme: Scheme) -> Result<HeatState> {
    s.u.check_grid(op.grid())?;
    let stepper = op.stepper(dt, scheme)?;
    let mut next = s.clone();
    stepper.step(&mut next);
    Ok(next)
}

/// Observables of a solution at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatRecord {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub grad_l2: f64,
}

impl HeatRecord {
    pub fn of(op: &LocalOperator, t: f64, u: &GraphFunction) -> Self {
        Self {
            t,
            mass: u.integrate(),
            l1: u.lp_norm(1.0).unwrap_or(f64::NAN),
            l2: u.lp_norm(2.0).unwrap_or(f64::NAN),
            linf: u.lp_norm(f64::INFINITY).unwrap_or(f64::NAN),
            grad_l2: op.gradient_sq(u.values()).sqrt(),
        }
    }
}

/// What a run records besides the final state.
#[derive(Clone, Debug, Default)]
pub struct Observe {
    /// Sample times; each is snapped to the nearest step.
    pub times: Vec<f64>,
    pub snapshots: bool,
    /// Keep `‖u_x‖²` at every step for the energy identity.
    pub gradient_history: bool,
}

impl Observe {
    pub fn at(times: impl IntoIterator<Item = f64>) -> Self {
        Self {
            times: times.into_iter().collect(),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeatRun {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<HeatRecord>,
    pub snapshots: Vec<(f64, GraphFunction)>,
    /// `(t, ‖u_x‖²)` after every step and every start-up substep.
    pub gradient_history: Option<Vec<(f64, f64)>>,
    pub initial_l2_sq: f64,
    pub final_state: HeatState,
}

/// Step count and the step size that lands exactly on `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time must be positive, got {t_final}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    Ok((steps, t_final / steps as f64))
}

/// Maps requested times to step indices.
pub(crate) fn observation_steps(times: &[f64], dt: f64, steps: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0) || t > steps as f64 * dt * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!("observation time {t} outside the run")));
        }
        idx.push(((t / dt).round() as usize).min(steps));
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

/// Rays are truncated, so a run is trusted only while `10√t ≤ L_trunc`.
pub fn check_validity_window(g: &MetricGraph, grid: &Grid, t_final: f64, extra: f64) -> Result<()> {
    if g.num_infinite() > 0 && 10.0 * t_final.sqrt() + extra > grid.l_trunc() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "truncation length {} too short for T = {t_final}: need at least {}",
            grid.l_trunc(),
            10.0 * t_final.sqrt() + extra
        )));
    }
    Ok(())
}

/// Runs from `u0` to `t_final`. Crank–Nicolson runs start with four implicit
/// Euler half steps.
pub fn solve_heat(
    g: &MetricGraph,
    grid: Arc<Grid>,
    u0: &GraphFunction,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
    observe: &Observe,
) -> Result<HeatRun> {
    check_validity_window(g, &grid, t_final, 0.0)?;
    u0.check_grid(&grid)?;
    let (steps, dt) = step_plan(t_final, dt)?;
    let op = assemble_local(g, grid)?;
    let stepper = op.stepper(dt, scheme)?;
    // Crank–Nicolson barely damps the stiffest modes, so rough data ring for
    // a long time. The first two steps are replaced by four implicit Euler
    // half steps, which keeps second order and kills the high modes.
    let startup = match scheme {
        Scheme::CrankNicolson if steps >= 2 => Some(op.stepper(0.5 * dt, Scheme::ImplicitEuler)?),
        _ => None,
    };
    let obs = observation_steps(&observe.times, dt, steps)?;

    let mut state = HeatState::new(u0.clone());
    let initial_l2_sq = u0.dot(u0);
    let mut records = Vec::with_capacity(obs.len());
    let mut snapshots = Vec::new();
    let mut history = observe.gradient_history.then(|| Vec::with_capacity(steps + 3));
    let mut next_obs = obs.iter().peekable();

    for n in 0..=steps {
        if n > 0 {
            match &startup {
                Some(half) if n <= 2 => {
                    half.advance(state.u.values_mut());
                    if let Some(h) = history.as_mut() {
                        h.push(((n as f64 - 0.5) * dt, op.gradient_sq(state.u.values())));
                    }
                    half.advance(state.u.values_mut());
                }
                _ => stepper.advance(state.u.values_mut()),
            }
            state.t = n as f64 * dt;
        }
        if let Some(h) = history.as_mut() {
            h.push((state.t, op.gradient_sq(state.u.values())));
        }
        if next_obs.peek() == Some(&&n) {
            next_obs.next();
            records.push(HeatRecord::of(&op, state.t, &state.u));
            if observe.snapshots {
                snapshots.push((state.t, state.u.clone()));
            }
        }
    }

    Ok(HeatRun {
        scheme,
        dt,
        steps,
        records,
        snapshots,
        gradient_history: history,
        initial_l2_sq,
        final_state: state,
    })
}

/// Residual of `2∫₀ᵀ‖u_x‖² dt = ‖u(0)‖² − ‖u(T)‖²`, with the time integral
/// taken by the trapezoidal rule over the recorded (sub)steps.
pub fn discrete_energy_identity(run: &HeatRun) -> Result<f64> {
    let history = run.gradient_history.as_ref().ok_or(Error::MissingGradient)?;
    if history.len() < run.steps + 1 {
        return Err(Error::MissingGradient);
    }
    let dissipated: f64 = history
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum();
    let final_l2_sq = run.final_state.u.dot(&run.final_state.u);
    Ok((2.0 * dissipated - (run.initial_l2_sq - final_l2_sq)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::samples;
    use crate::grid::GridSpec;

    fn setup(spec: crate::graph::GraphSpec, h: f64, l: f64) -> (MetricGraph, Arc<Grid>) {
        let g = spec.build().unwrap();
        let grid = Arc::new(Grid::new(&g, &GridSpec { h, l_trunc: l }).unwrap());
        (g, grid)
    }

    #[test]
    fn single_interval_is_neumann_stencil() {
        let (g, grid) = setup(samples::interval(1.0), 0.1, 1.0);
        let op = assemble_local(&g, grid).unwrap();
        let a = op.matrix();
        let inv_h2 = 1.0 / 0.01;
        for i in 0..10 {
            let expect_diag = if i == 0 || i == 9 { -inv_h2 } else { -2.0 * inv_h2 };
            assert!((a.get(i, i) - expect_diag).abs() < 1e-9, "row {i}");
            if i > 0 {
                assert!((a.get(i, i - 1) - inv_h2).abs() < 1e-9);
            }
            if i < 9 {
                assert!((a.get(i, i + 1) - inv_h2).abs() < 1e-9);
            }
            assert_eq!(a.row(i).count(), if i == 0 || i == 9 { 2 } else { 3 });
        }
    }

    #[test]
    fn star_trace_is_average_of_first_cells() {
        let (g, grid) = setup(samples::star(3), 0.5, 2.0);
        let op = assemble_local(&g, grid.clone()).unwrap();
        let u = GraphFunction::sample(grid, |e, x| (e.0 as f64 + 1.0) * 10.0 + x);
        let tau = op.vertex_traces(&u)[0];
        let expect = (10.25 + 20.25 + 30.25) / 3.0;
        assert!((tau - expect).abs() < 1e-12);
    }

    #[test]
    fn constants_are_equilibria() {
        let (g, grid) = setup(samples::mixed5(), 0.1, 5.0);
        let op = assemble_local(&g, grid.clone()).unwrap();
        let one = GraphFunction::constant(grid.clone(), 1.0);
        let au = op.apply(&one).unwrap();
        assert!(au.values().iter().all(|v| v.abs() < 1e-9));
        let mut s = HeatState::new(GraphFunction::constant(grid, 2.5));
        let stepper = op.stepper(0.7, Scheme::CrankNicolson).unwrap();
        for _ in 0..5 {
            stepper.step(&mut s);
        }
        assert!(s.u.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn implicit_euler_damps_cosine_mode_by_its_discrete_eigenvalue() {
        let l = 2.0;
        let n = 200;
        let (g, grid) = setup(samples::interval(l), l / n as f64, 1.0);
        let op = assemble_local(&g, grid.clone()).unwrap();
        let h = l / n as f64;
        let k = std::f64::consts::PI / l;
        // cell-center samples of cos(kx) are an exact eigenvector of the
        // Neumann stencil with eigenvalue −(2 − 2cos(kh))/h²
        let u = GraphFunction::sample(grid, |_, x| (k * x).cos());
        let lambda = (2.0 - 2.0 * (k * h).cos()) / (h * h);
        let dt = 0.01;
        let next = step_local(&op, &HeatState::new(u.clone()), dt, Scheme::ImplicitEuler).unwrap();
        let factor = 1.0 / (1.0 + dt * lambda);
        for (a, b) in next.u.values().iter().zip(u.values()) {
            assert!((a - factor * b).abs() < 1e-12);
        }
        assert!((lambda - k * k).abs() < 1e-4 * k * k);
    }

    #[test]
    fn operator_is_weighted_symmetric() {
        let (g, grid) = setup(samples::tadpole_ray(), 0.07, 3.0);
        let op = assemble_local(&g, grid).unwrap();
        let s = op.stiffness();
        for i in 0..s.dim() {
            for (j, v) in s.row(i) {
                assert!((v - s.get(j, i)).abs() < 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_dirichlet_form() {
        let (g, grid) = setup(samples::mixed5(), 0.1, 4.0);
        let op = assemble_local(&g, grid.clone()).unwrap();
        let u = GraphFunction::sample(grid, |e, x| (x + e.0 as f64).sin());
        let form = -op.stiffness().mul(u.values()).iter().zip(u.values()).map(|(a, b)| a * b).sum::<f64>();
        let grad = op.gradient_sq(u.values());
        assert!((form - grad).abs() < 1e-10 * grad);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let (g, grid) = setup(samples::star(3), 0.1, 20.0);
        let u0 = GraphFunction::zeros(grid.clone());
        let run = solve_heat(&g, grid, &u0, 1.0, 0.1, Scheme::CrankNicolson, &Observe {
            times: vec![0.0, 0.5, 1.0],
            gradient_history: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(run.records.len(), 3);
        assert!(run.records.iter().all(|r| r.l1 == 0.0 && r.grad_l2 == 0.0));
        assert_eq!(discrete_energy_identity(&run).unwrap(), 0.0);
    }

    #[test]
    fn energy_identity_needs_history() {
        let (g, grid) = setup(samples::star(3), 0.1, 20.0);
        let u0 = GraphFunction::zeros(grid.clone());
        let run = solve_heat(&g, grid, &u0, 1.0, 0.1, Scheme::ImplicitEuler, &Observe::default()).unwrap();
        assert!(matches!(discrete_energy_identity(&run), Err(Error::MissingGradient)));
    }

    #[test]
    fn validity_window_enforced() {
        let (g, grid) = setup(samples::star(3), 0.5, 100.0);
        let u0 = GraphFunction::zeros(grid.clone());
        let err = solve_heat(&g, grid, &u0, 400.0, 1.0, Scheme::ImplicitEuler, &Observe::default());
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
