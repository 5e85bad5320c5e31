//! The nonlocal operator `L_ε u(x) = ∫_Γ J_ε(d(x,y)) (u(y) − u(x)) dy` with
//! `J_ε(r) = ε⁻³J(r/ε)`, discretized by midpoint quadrature over the cells:
//! `(L u)_i = Σ_j K_ij (u_j − u_i)`, `K_ij = J_ε(d(x_i, x_j))·w_j`.
//!
//! Since `J_ε` depends only on the distance, `w_i K_ij` is symmetric. That
//! makes `L` self-adjoint in the inner product weighted by the cell
//! measures and gives exact discrete mass conservation. Vertices carry no
//! unknowns and no condition.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::GraphFunction;
use crate::graph::{EdgeId, MetricGraph};
use crate::grid::Grid;
use crate::kernels::Kernel;
use crate::linalg::{conjugate_gradient, wdot, CsrMatrix};
use crate::local::{self, check_validity_window, observation_steps, step_plan, Observe};

/// Refuse to assemble kernel matrices with more stored pairs than this.
pub const MAX_PAIRS: usize = 60_000_000;

const CG_RTOL: f64 = 1e-12;
const CG_MAX_ITER: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlocalScheme {
    ImplicitEuler,
    ExplicitEuler,
}

/// All cell pairs within a cutoff distance, with their graph distances.
#[derive(Clone, Debug)]
pub struct PairCache {
    grid: Arc<Grid>,
    radius: f64,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    dists: Vec<f64>,
}

fn cells_within(ec_cells: usize, h: f64, lo: f64, hi: f64) -> Range<usize> {
    // cells whose centers (k + 1/2)h lie in [lo, hi]
    if hi < lo {
        return 0..0;
    }
    let start = ((lo / h - 0.5).ceil().max(0.0)) as usize;
    let end = (((hi / h - 0.5).floor() + 1.0).max(0.0) as usize).min(ec_cells);
    start.min(end)..end
}

fn neighbours(g: &MetricGraph, grid: &Grid, i: usize, radius: f64) -> Vec<(usize, f64)> {
    let x = grid.point(i);
    let dv = g.distances_to_vertices(x);
    let mut out = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        let ec = grid.edge(EdgeId(e));
        let a0 = dv[edge.initial.0];
        let a1 = edge.terminal.map(|t| dv[t.0]);
        // candidate windows are padded; the exact test is `d <= radius` below
        let r = radius + 1e-9 * radius.max(1.0);
        let mut ranges: Vec<Range<usize>> = Vec::with_capacity(3);
        if e == x.edge.0 {
            ranges.push(cells_within(ec.cells, ec.h, x.coord - r, x.coord + r));
        }
        ranges.push(cells_within(ec.cells, ec.h, 0.0, r - a0));
        if let Some(a1) = a1 {
            ranges.push(cells_within(ec.cells, ec.h, ec.length - (r - a1), ec.length));
        }
        ranges.retain(|r| !r.is_empty());
        ranges.sort_by_key(|r| r.start);
        let mut merged: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match merged.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => merged.push(r),
            }
        }
        for r in merged {
            for k in r {
                let y = ec.center(k);
                let mut d = a0 + y;
                if let Some(a1) = a1 {
                    d = d.min(a1 + (ec.length - y));
                }
                if e == x.edge.0 {
                    d = d.min((y - x.coord).abs());
                }
                if d <= radius {
                    out.push((ec.offset + k, d));
                }
            }
        }
    }
    out.sort_by_key(|&(j, _)| j);
    out
}

impl PairCache {
    pub fn build(g: &MetricGraph, grid: Arc<Grid>, radius: f64) -> Result<PairCache> {
        grid.check_matches(g)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff radius must be positive, got {radius}")));
        }
        let n = grid.len();
        // crude upper bound before allocating: the same-edge band alone
        let band: usize = grid
            .edges()
            .iter()
            .map(|ec| ec.cells * (2.0 * radius / ec.h + 1.0).min(n as f64) as usize)
            .sum();
        if band > MAX_PAIRS {
            return Err(Error::TooDense {
                entries: band,
                limit: MAX_PAIRS,
            });
        }
        // Keep the pairs with j ≥ i and mirror them, so that both orientations
        // of a pair share one distance value.
        let upper: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = neighbours(g, &grid, i, radius);
                row.retain(|&(j, _)| j >= i);
                row
            })
            .collect();
        let total: usize = upper.iter().map(|r| 2 * r.len()).sum::<usize>() - n;
        if total > MAX_PAIRS {
            return Err(Error::TooDense {
                entries: total,
                limit: MAX_PAIRS,
            });
        }
        let mut lower: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in upper.iter().enumerate() {
            for &(j, d) in row {
                if j > i {
                    lower[j].push((i, d));
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(total);
        let mut dists = Vec::with_capacity(total);
        offsets.push(0);
        for (lo, up) in lower.into_iter().zip(upper) {
            for (j, d) in lo.into_iter().chain(up) {
                cols.push(j);
                dists.push(d);
            }
            offsets.push(cols.len());
        }
        Ok(PairCache {
            grid,
            radius,
            offsets,
            cols,
            dists,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.dists[r].iter().copied())
    }

    /// The pairs within a smaller radius, without recomputing distances.
    pub fn shrink(&self, radius: f64) -> PairCache {
        if radius >= self.radius {
            return self.clone();
        }
        let n = self.grid.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut dists = Vec::new();
        offsets.push(0);
        for i in 0..n {
            for (j, d) in self.row(i) {
                if d <= radius {
                    cols.push(j);
                    dists.push(d);
                }
            }
            offsets.push(cols.len());
        }
        PairCache {
            grid: self.grid.clone(),
            radius,
            offsets,
            cols,
            dists,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlocalOperator {
    grid: Arc<Grid>,
    kernel: Kernel,
    epsilon: f64,
    weights: Vec<f64>,
    couplings: CsrMatrix,
    diag: Vec<f64>,
}

fn check_resolved(grid: &Grid, kernel: &Kernel, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let support = kernel.rescaled_support(epsilon);
    let h = grid.max_h();
    if support < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::KernelUnresolved { support, h });
    }
    Ok(())
}

pub fn assemble_nonlocal(
    g: &MetricGraph,
    grid: Arc<Grid>,
    kernel: &Kernel,
    epsilon: f64,
) -> Result<NonlocalOperator> {
    check_resolved(&grid, kernel, epsilon)?;
    let cache = PairCache::build(g, grid, kernel.rescaled_support(epsilon))?;
    NonlocalOperator::from_pairs(&cache, kernel, epsilon)
}

impl NonlocalOperator {
    pub fn from_pairs(cache: &PairCache, kernel: &Kernel, epsilon: f64) -> Result<Self> {
        let grid = cache.grid.clone();
        check_resolved(&grid, kernel, epsilon)?;
        if cache.radius < kernel.rescaled_support(epsilon) * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "pair cache radius {} is smaller than the kernel support {}",
                cache.radius,
                kernel.rescaled_support(epsilon)
            )));
        }
        let weights = grid.weights();
        let n = grid.len();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                cache
                    .row(i)
                    .filter_map(|(j, d)| {
                        let k = kernel.eval_rescaled(epsilon, d) * weights[j];
                        (k > 0.0).then_some((j, k))
                    })
                    .collect()
            })
            .collect();
        let couplings = CsrMatrix::from_rows(rows);
        let diag = (0..n).map(|i| couplings.row_sum(i)).collect();
        Ok(Self {
            grid,
            kernel: kernel.clone(),
            epsilon,
            weights,
            couplings,
            diag,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `K_ij = J_ε(d_ij)·w_j`.
    pub fn couplings(&self) -> &CsrMatrix {
        &self.couplings
    }

    /// `D_i = Σ_j K_ij`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn max_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }

    fn apply_raw(&self, u: &[f64], out: &mut [f64]) {
        let body = |(i, o): (usize, &mut f64)| {
            let ui = u[i];
            *o = self.couplings.row(i).map(|(j, k)| k * (u[j] - ui)).sum();
        };
        if u.len() < 4096 {
            out.iter_mut().enumerate().for_each(body);
        } else {
            out.par_iter_mut().enumerate().for_each(body);
        }
    }

    pub fn apply(&self, u: &GraphFunction) -> Result<GraphFunction> {
        u.check_grid(&self.grid)?;
        let mut out = vec![0.0; u.values().len()];
        self.apply_raw(u.values(), &mut out);
        GraphFunction::from_values(self.grid.clone(), out)
    }

    /// `𝓔(u,u) = ∫∫ J_ε(d(x,y)) (u(x) − u(y))² dx dy` by the same quadrature.
    pub fn energy(&self, u: &GraphFunction) -> Result<f64> {
        u.check_grid(&self.grid)?;
        Ok(self.energy_raw(u.values()))
    }

    fn energy_raw(&self, u: &[f64]) -> f64 {
        let per_row: Vec<f64> = (0..u.len())
            .into_par_iter()
            .map(|i| {
                let ui = u[i];
                self.weights[i]
                    * self
                        .couplings
                        .row(i)
                        .map(|(j, k)| k * (ui - u[j]).powi(2))
                        .sum::<f64>()
            })
            .collect();
        per_row.iter().sum()
    }

    /// Largest explicit step keeping `dt·2·max D ≤ 1`.
    pub fn explicit_dt_bound(&self) -> f64 {
        0.5 / self.max_diagonal()
    }

    /// One step in place. Returns the number of solver iterations.
    pub fn advance(&self, u: &mut [f64], dt: f64, scheme: NonlocalScheme) -> Result<usize> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let mut lu = vec![0.0; u.len()];
        self.apply_raw(u, &mut lu);
        match scheme {
            NonlocalScheme::ExplicitEuler => {
                let bound = self.explicit_dt_bound();
                if dt > bound * (1.0 + 1e-12) {
                    return Err(Error::ExplicitUnstable { dt, bound });
                }
                for (ui, li) in u.iter_mut().zip(lu) {
                    *ui += dt * li;
                }
                Ok(0)
            }
            NonlocalScheme::ImplicitEuler => {
                // (I − dt L) δ = dt L u. Every Krylov vector lies in the range
                // of L, which has zero weighted mean, so δ carries no mass.
                for v in &mut lu {
                    *v *= dt;
                }
                let mut scratch = vec![0.0; u.len()];
                let (delta, iters) = conjugate_gradient(
                    |x, out| {
                        self.apply_raw(x, &mut scratch);
                        for ((o, xi), s) in out.iter_mut().zip(x).zip(&scratch) {
                            *o = xi - dt * s;
                        }
                    },
                    &self.weights,
                    &lu,
                    CG_RTOL,
                    CG_MAX_ITER,
                )?;
                for (ui, di) in u.iter_mut().zip(delta) {
                    *ui += di;
                }
                Ok(iters)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlocalState {
    pub t: f64,
    pub u: GraphFunction,
}

pub fn step_nonlocal(
    op: &NonlocalOperator,
    state: &NonlocalState,
    dt: f64,
    scheme: NonlocalScheme,
) -> Result<NonlocalState> {
    state.u.check_grid(op.grid())?;
    let mut next = state.clone();
    op.advance(next.u.values_mut(), dt, scheme)?;
    next.t += dt;
    Ok(next)
}

pub fn energy(op: &NonlocalOperator, u: &GraphFunction) -> Result<f64> {
    op.energy(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonlocalRecord {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct NonlocalRun {
    pub scheme: NonlocalScheme,
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<NonlocalRecord>,
    pub snapshots: Vec<(f64, GraphFunction)>,
    /// `Σ_n dt·𝓔(u_{n+1})` when energy tracking was requested.
    pub dissipated: Option<f64>,
    pub initial_l2_sq: f64,
    pub final_state: NonlocalState,
}

impl NonlocalRun {
    /// Residual of `‖u_N‖² + Σ dt 𝓔(u_{n+1}) = ‖u_0‖²`; `O(dt)` for
    /// implicit Euler.
    pub fn energy_residual(&self) -> Result<f64> {
        let dissipated = self.dissipated.ok_or(Error::MissingGradient)?;
        let u = &self.final_state.u;
        Ok((u.dot(u) + dissipated - self.initial_l2_sq).abs())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn solve_nonlocal(
    g: &MetricGraph,
    op: &NonlocalOperator,
    u0: &GraphFunction,
    t_final: f64,
    dt: f64,
    scheme: NonlocalScheme,
    observe: &Observe,
) -> Result<NonlocalRun> {
    check_validity_window(g, op.grid(), t_final, op.kernel.rescaled_support(op.epsilon))?;
    u0.check_grid(op.grid())?;
    let (steps, dt) = step_plan(t_final, dt)?;
    let obs = observation_steps(&observe.times, dt, steps)?;
    let record = |t: f64, u: &GraphFunction| NonlocalRecord {
        t,
        mass: u.integrate(),
        l1: u.lp_norm(1.0).unwrap_or(f64::NAN),
        l2: u.lp_norm(2.0).unwrap_or(f64::NAN),
        linf: u.lp_norm(f64::INFINITY).unwrap_or(f64::NAN),
        energy: op.energy_raw(u.values()),
    };

    let mut state = NonlocalState { t: 0.0, u: u0.clone() };
    let mut records = Vec::with_capacity(obs.len());
    let mut snapshots = Vec::new();
    let mut dissipated = observe.gradient_history.then_some(0.0);
    let mut next_obs = obs.iter().peekable();
    for n in 0..=steps {
        if n > 0 {
            op.advance(state.u.values_mut(), dt, scheme)?;
            state.t = n as f64 * dt;
            if let Some(d) = dissipated.as_mut() {
                *d += dt * op.energy_raw(state.u.values());
            }
        }
        if next_obs.peek() == Some(&&n) {
            next_obs.next();
            records.push(record(state.t, &state.u));
            if observe.snapshots {
                snapshots.push((state.t, state.u.clone()));
            }
        }
    }
    Ok(NonlocalRun {
        scheme,
        dt,
        steps,
        records,
        snapshots,
        dissipated,
        initial_l2_sq: u0.dot(u0),
        final_state: state,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelaxRow {
    pub epsilon: f64,
    pub space_time_l2_error: f64,
}

/// For each `ε`, the distance `‖u^ε − u_local‖_{L²((0,T)×Γ)}` between the
/// rescaled nonlocal solution and the heat solution from the same datum.
///
/// For a kernel with `A = ½∫z²J ≠ 1` the reference is `u_local(A·t)`. Both
/// solutions use implicit Euler on the same step grid and the time integral
/// is the right-endpoint rule.
pub fn relaxation_sweep(
    g: &MetricGraph,
    grid: Arc<Grid>,
    kernel: &Kernel,
    u0: &GraphFunction,
    t_final: f64,
    dt: f64,
    epsilons: &[f64],
) -> Result<Vec<RelaxRow>> {
    if epsilons.is_empty() {
        return Ok(Vec::new());
    }
    for &eps in epsilons {
        check_resolved(&grid, kernel, eps)?;
    }
    let max_eps = epsilons.iter().copied().fold(0.0, f64::max);
    check_validity_window(g, &grid, t_final, kernel.rescaled_support(max_eps))?;
    u0.check_grid(&grid)?;
    let a = kernel.second_moment_half();
    let (steps, dt) = step_plan(t_final, dt)?;

    let op = local::assemble_local(g, grid.clone())?;
    let stepper = op.stepper(a * dt, local::Scheme::ImplicitEuler)?;
    let mut reference = Vec::with_capacity(steps);
    let mut u = u0.values().to_vec();
    for _ in 0..steps {
        stepper.advance(&mut u);
        reference.push(u.clone());
    }

    let cache = PairCache::build(g, grid.clone(), kernel.rescaled_support(max_eps))?;
    let weights = grid.weights();
    epsilons
        .par_iter()
        .map(|&eps| {
            let op = NonlocalOperator::from_pairs(&cache.shrink(kernel.rescaled_support(eps)), kernel, eps)?;
            let mut u = u0.values().to_vec();
            let mut acc = 0.0;
            for r in &reference {
                op.advance(&mut u, dt, NonlocalScheme::ImplicitEuler)?;
                let diff: Vec<f64> = u.iter().zip(r).map(|(a, b)| a - b).collect();
                acc += dt * wdot(&weights, &diff, &diff);
            }
            Ok(RelaxRow {
                epsilon: eps,
                space_time_l2_error: acc.sqrt(),
            })
        })
        .collect()
}

/// `max |L_ε φ − A φ''|` over cells farther than `margin` from every vertex
/// and from the truncated ends.
pub fn taylor_residual(
    g: &MetricGraph,
    op: &NonlocalOperator,
    phi: impl Fn(EdgeId, f64) -> f64,
    phi_xx: impl Fn(EdgeId, f64) -> f64,
    margin: f64,
) -> Result<f64> {
    let grid = op.grid().clone();
    let u = GraphFunction::sample(grid.clone(), &phi);
    let lu = op.apply(&u)?;
    let a = op.kernel().second_moment_half();
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let p = grid.point(i);
        let ec = grid.edge(p.edge);
        let to_vertex = g.distances_to_vertices(p).into_iter().fold(f64::INFINITY, f64::min);
        let to_end = if ec.infinite { ec.length - p.coord } else { f64::INFINITY };
        if to_vertex <= margin || to_end <= margin {
            continue;
        }
        worst = worst.max((lu.values()[i] - a * phi_xx(p.edge, p.coord)).abs());
    }
    Ok(worst)
}

/// `ε⁻³ ∫_e ∫_{e'} J(d(x,y)/ε) (φ(y) − φ(x))² dx dy` for two edges without a
/// common vertex.
pub fn cross_edge_energy(
    g: &MetricGraph,
    grid: &Grid,
    kernel: &Kernel,
    epsilon: f64,
    phi: &GraphFunction,
    e: EdgeId,
    e2: EdgeId,
) -> Result<f64> {
    grid.check_matches(g)?;
    phi.check_grid(grid)?;
    if e.0 >= g.num_edges() || e2.0 >= g.num_edges() {
        return Err(Error::InvalidParameter("edge index out of range".into()));
    }
    if g.adjacent(e, e2) {
        return Err(Error::AdjacentEdges(e.0, e2.0));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let radius = kernel.rescaled_support(epsilon);
    let (ea, eb) = (grid.edge(e), grid.edge(e2));
    let (va, vb) = (phi.edge_values(e), phi.edge_values(e2));
    let rows: Vec<f64> = (0..ea.cells)
        .into_par_iter()
        .map(|k| {
            let x = crate::graph::GraphPoint { edge: e, coord: ea.center(k) };
            let mut s = 0.0;
            for m in 0..eb.cells {
                let y = crate::graph::GraphPoint { edge: e2, coord: eb.center(m) };
                let d = g.distance(x, y);
                if d <= radius {
                    s += kernel.eval_rescaled(epsilon, d) * eb.h * (vb[m] - va[k]).powi(2);
                }
            }
            s * ea.h
        })
        .collect();
    Ok(rows.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::samples;
    use crate::grid::GridSpec;
    use crate::kernels::{builtin_kernel, KernelParams};

    fn setup(spec: crate::graph::GraphSpec, h: f64, l: f64) -> (MetricGraph, Arc<Grid>) {
        let g = spec.build().unwrap();
        let grid = Arc::new(Grid::new(&g, &GridSpec { h, l_trunc: l }).unwrap());
        (g, grid)
    }

    #[test]
    fn pair_cache_agrees_with_brute_force() {
        let (g, grid) = setup(samples::tadpole_ray(), 0.1, 3.0);
        let cache = PairCache::build(&g, grid.clone(), 0.75).unwrap();
        for i in 0..grid.len() {
            let brute: Vec<(usize, f64)> = (0..grid.len())
                .filter_map(|j| {
                    let d = g.distance(grid.point(i), grid.point(j));
                    (d <= 0.75).then_some((j, d))
                })
                .collect();
            let got: Vec<(usize, f64)> = cache.row(i).collect();
            assert_eq!(got.len(), brute.len(), "row {i}");
            for ((j1, d1), (j2, d2)) in got.iter().zip(&brute) {
                assert_eq!(j1, j2);
                assert!((d1 - d2).abs() < 1e-12);
            }
        }
        let small = cache.shrink(0.3);
        let direct = PairCache::build(&g, grid, 0.3).unwrap();
        assert_eq!(small.cols, direct.cols);
    }

    #[test]
    fn constants_in_kernel() {
        let (g, grid) = setup(samples::mixed5(), 0.1, 4.0);
        let op = assemble_nonlocal(&g, grid.clone(), &Kernel::tent(), 0.5).unwrap();
        let lu = op.apply(&GraphFunction::constant(grid.clone(), 3.0)).unwrap();
        assert!(lu.values().iter().all(|&v| v == 0.0));
        assert_eq!(op.energy(&GraphFunction::constant(grid, 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn two_cell_matrix_by_hand() {
        // one edge of length 1 cut in two cells of width 1/2, tent kernel
        let (g, grid) = setup(samples::interval(1.0), 0.5, 1.0);
        let op = assemble_nonlocal(&g, grid.clone(), &Kernel::tent(), 1.0).unwrap();
        let k = op.couplings();
        // K_00 = J(0)·½, K_01 = J(½)·½
        assert!((k.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.25).abs() < 1e-15);
        assert!((op.diagonal()[0] - 0.75).abs() < 1e-15);

        // indicator datum u = (1, 0): 𝓔 = 2·J(½)·w0·w1
        let u = GraphFunction::from_values(grid.clone(), vec![1.0, 0.0]).unwrap();
        assert!((op.energy(&u).unwrap() - 2.0 * 0.5 * 0.25).abs() < 1e-15);

        // difference mode decays like exp(−2·K_01·t)
        let dt = 1e-4;
        let mut s = NonlocalState { t: 0.0, u };
        for _ in 0..10_000 {
            s = step_nonlocal(&op, &s, dt, NonlocalScheme::ExplicitEuler).unwrap();
        }
        let diff = s.u.values()[0] - s.u.values()[1];
        assert!((diff - (-0.5f64).exp()).abs() < 1e-4, "{diff}");
        assert!((s.u.values()[0] + s.u.values()[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn unresolved_kernel_rejected() {
        let (g, grid) = setup(samples::star(3), 0.1, 3.0);
        assert!(matches!(
            assemble_nonlocal(&g, grid, &Kernel::tent(), 0.15),
            Err(Error::KernelUnresolved { .. })
        ));
    }

    #[test]
    fn explicit_bound_enforced() {
        let (g, grid) = setup(samples::star(3), 0.1, 3.0);
        let op = assemble_nonlocal(&g, grid.clone(), &Kernel::tent(), 1.0).unwrap();
        let s = NonlocalState { t: 0.0, u: GraphFunction::constant(grid, 1.0) };
        let dt = 2.0 * op.explicit_dt_bound();
        assert!(matches!(
            step_nonlocal(&op, &s, dt, NonlocalScheme::ExplicitEuler),
            Err(Error::ExplicitUnstable { .. })
        ));
        assert!(step_nonlocal(&op, &s, dt, NonlocalScheme::ImplicitEuler).is_ok());
    }

    #[test]
    fn weighted_symmetry() {
        let (g, grid) = setup(samples::tadpole_ray(), 0.1, 4.0);
        let k = builtin_kernel("truncated_gaussian", &KernelParams { sigma: Some(0.1), ..Default::default() }).unwrap();
        let op = assemble_nonlocal(&g, grid, &k, 1.0).unwrap();
        let w = op.weights();
        let c = op.couplings();
        for i in 0..c.dim() {
            for (j, v) in c.row(i) {
                assert!((w[i] * v - w[j] * c.get(j, i)).abs() < 1e-12 * (w[i] * v).max(1e-300));
            }
        }
    }

    #[test]
    fn cross_edge_rejects_adjacent_and_vanishes_beyond_support() {
        let (g, grid) = setup(samples::separated_rays(), 0.05, 5.0);
        let phi = GraphFunction::sample(grid.clone(), |e, x| if e.0 == 0 { x.sin() } else { 1.0 });
        let tent = Kernel::tent();
        assert!(matches!(
            cross_edge_energy(&g, &grid, &tent, 0.5, &phi, EdgeId(0), EdgeId(2)),
            Err(Error::AdjacentEdges(0, 2))
        ));
        let v = cross_edge_energy(&g, &grid, &tent, 0.9, &phi, EdgeId(0), EdgeId(1)).unwrap();
        assert_eq!(v, 0.0);
        let v = cross_edge_energy(&g, &grid, &tent, 1.5, &phi, EdgeId(0), EdgeId(1)).unwrap();
        assert!(v > 0.0);
    }
}
