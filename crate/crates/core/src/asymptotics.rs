//! The large-time profile of both evolutions and the tools to measure how
//! fast solutions approach it.
//!
//! With `M = ∫u₀`, `N` infinite edges and diffusion constant `A`, the
//! profile is a half-Gaussian carrying mass `M/N` on every ray and the constant
//! value at the origin on the compact part.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::GraphFunction;
use crate::graph::{GraphPoint, MetricGraph, Part};

/// `G(s) = e^{−s²/4}/√(4π)`.
pub fn heat_kernel_1d(s: f64) -> f64 {
    (-0.25 * s * s).exp() / (4.0 * PI).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Total mass `M`.
    pub mass: f64,
    /// Diffusion constant `A` (1 for the heat equation).
    pub a: f64,
    /// Number of infinite edges `N`.
    pub n_infinite: usize,
}

impl ProfileParams {
    pub fn for_graph(g: &MetricGraph, mass: f64, a: f64) -> Result<Self> {
        let p = Self {
            mass,
            a,
            n_infinite: g.num_infinite(),
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.n_infinite == 0 {
            return Err(Error::NoInfiniteEdge);
        }
        if !(self.a > 0.0 && self.a.is_finite()) || !self.mass.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "profile needs finite mass and positive diffusion constant, got M = {}, A = {}",
                self.mass, self.a
            )));
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be positive, got {t}")))
    }
}

/// `U_M(t, x)`.
pub fn profile_value(g: &MetricGraph, params: &ProfileParams, x: GraphPoint, t: f64) -> Result<f64> {
    params.check()?;
    check_time(t)?;
    g.validate_point(x)?;
    let at = params.a * t;
    let scale = 2.0 * params.mass / params.n_infinite as f64 / at.sqrt();
    let s = if g.edge(x.edge).is_infinite() {
        x.coord / at.sqrt()
    } else {
        0.0
    };
    Ok(scale * heat_kernel_1d(s))
}

/// The profile sampled at the cell centers of `grid`.
pub fn profile_function(
    g: &MetricGraph,
    grid: std::sync::Arc<crate::grid::Grid>,
    params: &ProfileParams,
    t: f64,
) -> Result<GraphFunction> {
    params.check()?;
    check_time(t)?;
    grid.check_matches(g)?;
    let at = params.a * t;
    let scale = 2.0 * params.mass / params.n_infinite as f64 / at.sqrt();
    Ok(GraphFunction::sample(grid, |e, x| {
        if g.edge(e).is_infinite() {
            scale * heat_kernel_1d(x / at.sqrt())
        } else {
            scale * heat_kernel_1d(0.0)
        }
    }))
}

/// `(t^{½(1−1/p)}‖u − U‖_{Lᵖ(Γ∞)}, t^{½}‖u − U‖_{Lᵖ(Γf)})`. The second entry
/// is zero on graphs without a compact part.
pub fn weighted_error(u: &GraphFunction, profile: &GraphFunction, t: f64, p: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    let diff = u.sub(profile)?;
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let rays = diff.restrict(Part::Infinite).lp_norm(p)?;
    let finite = diff.restrict(Part::Finite);
    let fin = if finite.is_empty() { 0.0 } else { finite.lp_norm(p)? };
    Ok((t.powf(0.5 * (1.0 - inv_p)) * rays, t.sqrt() * fin))
}

/// Slope of the least-squares line through `(log t, log y)`.
pub fn fit_decay_exponent(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|&(&t, &y)| t > 0.0 && y > 0.0 && y.is_finite())
        .map(|(&t, &y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::TooFewSamples {
            need: 5,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("sample times are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// `n` times spaced geometrically over `[t0, t1]`.
pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t1];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `∫ u` over the points of the rays farther than `radius` from their
/// origin, with the cell straddling the cut counted in part.
pub fn tail_mass(u: &GraphFunction, radius: f64) -> Result<f64> {
    let grid = u.grid();
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {radius}")));
    }
    if radius >= grid.l_trunc() {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} reaches the truncation length {}",
            grid.l_trunc()
        )));
    }
    let mut total = 0.0;
    for (e, ec) in grid.edges().iter().enumerate() {
        if !ec.infinite {
            continue;
        }
        let vals = u.edge_values(crate::graph::EdgeId(e));
        for (k, v) in vals.iter().enumerate() {
            let lo = k as f64 * ec.h;
            let hi = lo + ec.h;
            let covered = (hi - lo.max(radius)).max(0.0);
            total += v * covered;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::samples;
    use crate::grid::{Grid, GridSpec};
    use std::sync::Arc;

    #[test]
    fn origin_value_on_star() {
        let g = samples::star(3).build().unwrap();
        let p = ProfileParams::for_graph(&g, 1.5, 1.0).unwrap();
        let v = profile_value(&g, &p, GraphPoint::new(0, 0.0), 1.0).unwrap();
        assert!((v - 0.28209479177387814).abs() < 1e-15);
    }

    #[test]
    fn mass_per_ray() {
        let g = samples::tadpole_ray().build().unwrap();
        let grid = Arc::new(Grid::new(&g, &GridSpec { h: 0.01, l_trunc: 60.0 }).unwrap());
        let p = ProfileParams::for_graph(&g, 3.0, 1.0).unwrap();
        let u = profile_function(&g, grid, &p, 4.0).unwrap();
        let rays = u.restrict(Part::Infinite).integrate();
        assert!((rays - 3.0).abs() < 1e-4, "{rays}");
    }

    #[test]
    fn recovers_synthetic_slope() {
        let times = log_spaced(10.0, 1000.0, 12);
        let vals: Vec<f64> = times.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let s = fit_decay_exponent(&times, &vals).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
        assert!(matches!(
            fit_decay_exponent(&times[..4], &vals[..4]),
            Err(Error::TooFewSamples { need: 5, got: 4 })
        ));
    }

    #[test]
    fn tail_of_half_gaussian() {
        // one ray: U = 2M (t)^{-1/2} G(x/√t); tail beyond R is M·erfc(R/2√t)
        let g = samples::star(1).build().unwrap();
        let grid = Arc::new(Grid::new(&g, &GridSpec { h: 0.001, l_trunc: 40.0 }).unwrap());
        let p = ProfileParams::for_graph(&g, 0.5, 1.0).unwrap();
        let u = profile_function(&g, grid, &p, 4.0).unwrap();
        let tail = tail_mass(&u, 2.0).unwrap();
        let expected = 0.5 * 0.4795001221869535;
        assert!((tail - expected).abs() < 1e-6, "{tail}");
        assert!(tail_mass(&u, 40.0).is_err());
    }

    #[test]
    fn error_weights() {
        let g = samples::tadpole_ray().build().unwrap();
        let grid = Arc::new(Grid::new(&g, &GridSpec { h: 0.5, l_trunc: 2.0 }).unwrap());
        let zero = GraphFunction::zeros(grid.clone());
        let one = GraphFunction::constant(grid, 1.0);
        let (inf, fin) = weighted_error(&one, &zero, 4.0, 2.0).unwrap();
        assert!((inf - 4f64.powf(0.25) * 2f64.sqrt()).abs() < 1e-14);
        assert!((fin - 2.0 * 5f64.sqrt()).abs() < 1e-14);
    }
}
