//! Cell-averaged functions on a gridded metric graph, their integrals and
//! L^p norms, and the parabolic rescaling `u_λ(x) = λ u(λx)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph, Part};
use crate::grid::{EdgeCells, Grid};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")))
    }
}

fn edge_lp_pow(vals: &[f64], h: f64, p: f64) -> f64 {
    if p == 1.0 {
        vals.iter().map(|v| v.abs()).sum::<f64>() * h
    } else if p == 2.0 {
        vals.iter().map(|v| v * v).sum::<f64>() * h
    } else {
        vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() * h
    }
}

fn lp_over<'a>(parts: impl Iterator<Item = (&'a EdgeCells, &'a [f64])>, p: f64) -> f64 {
    if p.is_infinite() {
        parts
            .flat_map(|(_, v)| v.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    } else {
        parts.map(|(ec, v)| edge_lp_pow(v, ec.h, p)).sum::<f64>().powf(1.0 / p)
    }
}

// 3-point Gauss-Legendre on [-1, 1]
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

impl GraphFunction {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("value {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    /// Point samples at the cell centers.
    pub fn sample(grid: Arc<Grid>, f: impl Fn(EdgeId, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for (e, ec) in grid.edges().iter().enumerate() {
            values.extend((0..ec.cells).map(|k| f(EdgeId(e), ec.center(k))));
        }
        Self { grid, values }
    }

    /// Cell averages by 3-point Gauss quadrature on each cell.
    pub fn cell_average(grid: Arc<Grid>, f: impl Fn(EdgeId, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for (e, ec) in grid.edges().iter().enumerate() {
            let half = 0.5 * ec.h;
            values.extend((0..ec.cells).map(|k| {
                let c = ec.center(k);
                GAUSS3
                    .iter()
                    .map(|&(s, w)| 0.5 * w * f(EdgeId(e), c + half * s))
                    .sum::<f64>()
            }));
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn edge_values(&self, e: EdgeId) -> &[f64] {
        &self.values[self.grid.edge(e).range()]
    }

    pub fn same_grid(&self, other: &GraphFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *self.grid == *grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("function lives on a different grid".into()))
        }
    }

    fn parts(&self) -> impl Iterator<Item = (&EdgeCells, &[f64])> + '_ {
        self.grid
            .edges()
            .iter()
            .map(move |ec| (ec, &self.values[ec.range()]))
    }

    /// Midpoint quadrature of `∫_Γ f`.
    pub fn integrate(&self) -> f64 {
        self.parts()
            .map(|(ec, v)| v.iter().sum::<f64>() * ec.h)
            .sum()
    }

    /// `‖f‖_{L^p(Γ)}`; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        Ok(lp_over(self.parts(), p))
    }

    /// Weighted inner product `Σ_i w_i f_i g_i`.
    pub fn dot(&self, other: &GraphFunction) -> f64 {
        self.parts()
            .zip(other.parts())
            .map(|((ec, a), (_, b))| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * ec.h)
            .sum()
    }

    pub fn restrict(&self, part: Part) -> Restricted<'_> {
        let edges = self
            .grid
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, ec)| ec.infinite == (part == Part::Infinite))
            .map(|(e, _)| EdgeId(e))
            .collect();
        Restricted { f: self, edges }
    }

    /// Linear interpolation between cell centers, clamped at the edge ends.
    /// Zero beyond the truncation of a ray.
    pub fn interpolate(&self, e: EdgeId, x: f64) -> f64 {
        let ec = self.grid.edge(e);
        let vals = self.edge_values(e);
        if ec.infinite && x > ec.length {
            return 0.0;
        }
        let s = x / ec.h - 0.5;
        if s <= 0.0 {
            return vals[0];
        }
        let k = s.floor() as usize;
        if k + 1 >= vals.len() {
            return vals[vals.len() - 1];
        }
        let frac = s - k as f64;
        vals[k] * (1.0 - frac) + vals[k + 1] * frac
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GraphFunction {
        GraphFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &GraphFunction) -> Result<GraphFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch("subtracting functions on different grids".into()));
        }
        Ok(GraphFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }
}

/// A function seen only on `Γ_f` or only on `Γ_∞`.
#[derive(Clone, Debug)]
pub struct Restricted<'a> {
    f: &'a GraphFunction,
    edges: Vec<EdgeId>,
}

impl Restricted<'_> {
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn parts(&self) -> impl Iterator<Item = (&EdgeCells, &[f64])> + '_ {
        self.edges
            .iter()
            .map(move |&e| (self.f.grid.edge(e), self.f.edge_values(e)))
    }

    pub fn integrate(&self) -> f64 {
        self.parts().map(|(ec, v)| v.iter().sum::<f64>() * ec.h).sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        Ok(lp_over(self.parts(), p))
    }
}

pub fn integrate(f: &GraphFunction) -> f64 {
    f.integrate()
}

pub fn lp_norm(f: &GraphFunction, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

/// `u_λ(x) = λ u(λx)` sampled on a grid of `Γ^λ` by linear interpolation.
pub fn rescale_function(
    g: &MetricGraph,
    u: &GraphFunction,
    lambda: f64,
    target: Arc<Grid>,
) -> Result<GraphFunction> {
    let scaled = g.rescale(lambda)?;
    if !target.matches(&scaled) {
        return Err(Error::GridMismatch(format!(
            "target grid does not discretize the graph rescaled by {lambda}"
        )));
    }
    if lambda == 1.0 && *target == **u.grid() {
        return Ok(u.clone());
    }
    Ok(GraphFunction::sample(target, |e, x| {
        lambda * u.interpolate(e, lambda * x)
    }))
}
