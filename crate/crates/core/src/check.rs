//! The invariant suite behind `graphdiff check`: operator symmetry,
//! constants in the kernel, maximum principle, Lᵖ contraction, positivity,
//! mass conservation, kernel moment identities and distance axioms, each on a
//! small set of built-in graphs with seeded random data.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::experiments::CheckResult;
use crate::function::GraphFunction;
use crate::graph::{samples, GraphPoint, GraphSpec, MetricGraph};
use crate::grid::{Grid, GridSpec};
use crate::kernels::{adaptive_simpson, builtin_kernel, Kernel, KernelParams};
use crate::linalg::wdot;
use crate::local::{assemble_local, Scheme};
use crate::nonlocal::{assemble_nonlocal, NonlocalOperator, NonlocalScheme};

pub const DEFAULT_SEED: u64 = 20240611;

struct Case {
    name: &'static str,
    graph: MetricGraph,
    grid: Arc<Grid>,
}

fn case(name: &'static str, spec: GraphSpec, h: f64, l_trunc: f64) -> Result<Case> {
    let graph = spec.build()?;
    let grid = Arc::new(Grid::new(&graph, &GridSpec { h, l_trunc })?);
    Ok(Case { name, graph, grid })
}

fn cases() -> Result<Vec<Case>> {
    Ok(vec![
        case("star3", samples::star(3), 0.05, 20.0)?,
        case("mixed5", samples::mixed5(), 0.05, 20.0)?,
        case("tadpole", samples::tadpole_ray(), 0.05, 20.0)?,
    ])
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn rel_growth(before: f64, after: f64) -> f64 {
    ((after - before) / before.max(f64::MIN_POSITIVE)).max(0.0)
}

fn range(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

const STEPS: usize = 200;

fn local_checks(c: &Case, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c.grid.len();
    let op = assemble_local(&c.graph, c.grid.clone())?;
    let w = op.weights().to_vec();
    let mut out = Vec::new();
    let tag = |s: &str| format!("local_{s}[{}]", c.name);

    let u = random_vec(&mut rng, n, -1.0, 1.0);
    let v = random_vec(&mut rng, n, -1.0, 1.0);
    let au = op.matrix().mul(&u);
    let av = op.matrix().mul(&v);
    let scale = wdot(&w, &au, &au).sqrt() * wdot(&w, &v, &v).sqrt();
    out.push(CheckResult::at_most(
        tag("symmetry"),
        (wdot(&w, &au, &v) - wdot(&w, &u, &av)).abs() / scale,
        1e-12,
    ));

    let a1 = op.matrix().mul(&vec![1.0; n]);
    let row_scale = (0..n).map(|i| op.matrix().get(i, i).abs()).fold(0.0, f64::max);
    let worst = a1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.push(CheckResult::at_most(tag("constants_in_kernel"), worst / row_scale, 1e-12));

    // implicit Euler from a random signed datum
    let stepper = op.stepper(0.01, Scheme::ImplicitEuler)?;
    let mut x = random_vec(&mut rng, n, -1.0, 1.0);
    let (lo, hi) = range(&x);
    let m0 = wdot(&w, &x, &vec![1.0; n]);
    let mut prev = GraphFunction::from_values(c.grid.clone(), x.clone())?;
    let (mut maxp, mut growth) = (0.0f64, [0.0f64; 3]);
    for _ in 0..STEPS {
        stepper.advance(&mut x);
        let (a, b) = range(&x);
        maxp = maxp.max(lo - a).max(b - hi);
        let next = GraphFunction::from_values(c.grid.clone(), x.clone())?;
        for (g, p) in growth.iter_mut().zip([1.0, 2.0, f64::INFINITY]) {
            *g = g.max(rel_growth(prev.lp_norm(p)?, next.lp_norm(p)?));
        }
        prev = next;
    }
    out.push(CheckResult::at_most(tag("maximum_principle"), maxp.max(0.0), 1e-12));
    for (g, p) in growth.iter().zip(["l1", "l2", "linf"]) {
        out.push(CheckResult::at_most(tag(&format!("contraction_{p}")), *g, 1e-10));
    }
    let m = wdot(&w, &x, &vec![1.0; n]);
    out.push(CheckResult::at_most(tag("mass_conservation"), (m - m0).abs() / m0.abs().max(1.0), 1e-12));

    // Crank–Nicolson is an L² contraction
    let stepper = op.stepper(0.01, Scheme::CrankNicolson)?;
    let mut x = random_vec(&mut rng, n, -1.0, 1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..STEPS {
        let before = wdot(&w, &x, &x);
        stepper.advance(&mut x);
        worst = worst.max(rel_growth(before, wdot(&w, &x, &x)));
    }
    out.push(CheckResult::at_most(tag("crank_nicolson_l2_contraction"), worst, 1e-10));

    // positivity
    let stepper = op.stepper(0.05, Scheme::ImplicitEuler)?;
    let mut x = random_vec(&mut rng, n, 0.0, 1.0);
    let mut lowest: f64 = 0.0;
    for _ in 0..STEPS {
        stepper.advance(&mut x);
        lowest = lowest.min(range(&x).0);
    }
    out.push(CheckResult::new(tag("positivity"), -lowest, lowest >= 0.0));
    Ok(out)
}

fn nonlocal_checks(c: &Case, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let n = c.grid.len();
    let k = Kernel::tent().normalize_unit_second_moment()?;
    let op: NonlocalOperator = assemble_nonlocal(&c.graph, c.grid.clone(), &k, 0.5)?;
    let w = op.weights().to_vec();
    let mut out = Vec::new();
    let tag = |s: &str| format!("nonlocal_{s}[{}]", c.name);

    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let i = rng.gen_range(0..n);
        let row: Vec<(usize, f64)> = op.couplings().row(i).collect();
        let (j, kij) = row[rng.gen_range(0..row.len())];
        let a = w[i] * kij;
        let b = w[j] * op.couplings().get(j, i);
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    out.push(CheckResult::at_most(tag("weighted_symmetry"), worst, 1e-12));

    let l1 = op.apply(&GraphFunction::constant(c.grid.clone(), 1.0))?;
    let worst = l1.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.push(CheckResult::new(tag("constants_in_kernel"), worst, worst == 0.0));

    let u = GraphFunction::from_values(c.grid.clone(), random_vec(&mut rng, n, -1.0, 1.0))?;
    let lu = op.apply(&u)?;
    let total = lu.integrate();
    let scale = lu.lp_norm(1.0)?;
    out.push(CheckResult::at_most(tag("integral_of_Lu"), total.abs() / scale, 1e-12));

    let mut x = random_vec(&mut rng, n, -1.0, 1.0);
    let (lo, hi) = range(&x);
    let m0 = wdot(&w, &x, &vec![1.0; n]);
    let mut prev = GraphFunction::from_values(c.grid.clone(), x.clone())?;
    let (mut maxp, mut growth) = (0.0f64, [0.0f64; 3]);
    for _ in 0..STEPS / 4 {
        op.advance(&mut x, 0.05, NonlocalScheme::ImplicitEuler)?;
        let (a, b) = range(&x);
        maxp = maxp.max(lo - a).max(b - hi);
        let next = GraphFunction::from_values(c.grid.clone(), x.clone())?;
        for (g, p) in growth.iter_mut().zip([1.0, 2.0, f64::INFINITY]) {
            *g = g.max(rel_growth(prev.lp_norm(p)?, next.lp_norm(p)?));
        }
        prev = next;
    }
    out.push(CheckResult::at_most(tag("maximum_principle"), maxp.max(0.0), 1e-10));
    for (g, p) in growth.iter().zip(["l1", "l2", "linf"]) {
        out.push(CheckResult::at_most(tag(&format!("contraction_{p}")), *g, 1e-10));
    }
    let m = wdot(&w, &x, &vec![1.0; n]);
    out.push(CheckResult::at_most(tag("mass_conservation"), (m - m0).abs() / m0.abs().max(1.0), 1e-12));

    let dt = op.explicit_dt_bound();
    let mut x = random_vec(&mut rng, n, 0.0, 1.0);
    let mut lowest: f64 = 0.0;
    for _ in 0..STEPS {
        op.advance(&mut x, dt, NonlocalScheme::ExplicitEuler)?;
        lowest = lowest.min(range(&x).0);
    }
    out.push(CheckResult::new(tag("explicit_positivity"), -lowest, lowest >= 0.0));
    Ok(out)
}

fn kernel_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let kernels = [
        ("tent", builtin_kernel("tent", &KernelParams::default())?),
        (
            "indicator",
            builtin_kernel(
                "indicator",
                &KernelParams {
                    height: Some(3.0),
                    ..Default::default()
                },
            )?,
        ),
        (
            "truncated_gaussian",
            builtin_kernel(
                "truncated_gaussian",
                &KernelParams {
                    sigma: Some(0.7),
                    ..Default::default()
                },
            )?,
        ),
    ];
    for (name, k) in kernels {
        let r = k.support_radius();
        // split at the kinks so the quadrature sees smooth pieces
        let moment = |f: &dyn Fn(f64) -> f64| adaptive_simpson(f, 0.0, r, 1e-12);
        let a = moment(&|z| z * z * k.profile(z));
        out.push(CheckResult::at_most(
            format!("kernel_second_moment[{name}]"),
            (a - k.second_moment_half()).abs() / k.second_moment_half(),
            1e-8,
        ));
        let l1 = 2.0 * moment(&|z| k.profile(z));
        out.push(CheckResult::at_most(
            format!("kernel_l1_norm[{name}]"),
            (l1 - k.l1_norm()).abs() / k.l1_norm(),
            1e-8,
        ));
        let n = k.normalize_unit_second_moment()?;
        let a = moment(&|z| z * z * n.profile(z));
        out.push(CheckResult::at_most(format!("kernel_normalized[{name}]"), (a - 1.0).abs(), 1e-8));
        let mut worst: f64 = 0.0;
        for eps in [0.25, 0.5, 2.0] {
            let m = 2.0 * adaptive_simpson(|s| s * s * k.eval_rescaled(eps, s), 0.0, eps * r, 1e-12);
            worst = worst.max((m - 2.0 * k.second_moment_half()).abs() / (2.0 * k.second_moment_half()));
        }
        out.push(CheckResult::at_most(format!("kernel_rescaled_moment[{name}]"), worst, 1e-8));
        let mut violation: f64 = 0.0;
        let mut prev = k.profile(0.0);
        for i in 1..=1000 {
            let v = k.profile(1.5 * r * i as f64 / 1000.0);
            violation = violation.max(v - prev).max(-v);
            prev = v;
        }
        out.push(CheckResult::at_most(format!("kernel_monotone[{name}]"), violation, 0.0));
    }
    Ok(out)
}

fn distance_checks(c: &Case, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    let g = &c.graph;
    let point = |rng: &mut ChaCha8Rng| {
        let e = rng.gen_range(0..g.num_edges());
        let len = g.edges()[e].length;
        let reach = if len.is_finite() { len } else { 10.0 };
        GraphPoint::new(e, rng.gen_range(0.0..=reach))
    };
    let (mut asym, mut tri, mut selfd) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..300 {
        let (x, y, z) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let (dxy, dyz, dxz) = (g.distance(x, y), g.distance(y, z), g.distance(x, z));
        asym = asym.max((dxy - g.distance(y, x)).abs());
        tri = tri.max(dxz - dxy - dyz);
        selfd = selfd.max(g.distance(x, x));
    }
    vec![
        CheckResult::at_most(format!("distance_symmetric[{}]", c.name), asym, 0.0),
        CheckResult::at_most(format!("distance_triangle[{}]", c.name), tri.max(0.0), 1e-12),
        CheckResult::at_most(format!("distance_zero_on_diagonal[{}]", c.name), selfd, 0.0),
    ]
}

/// Runs the whole suite. Results come back in a fixed order.
pub fn run_check_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let cases = cases()?;
    let per_case: Vec<Result<Vec<CheckResult>>> = cases
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let s = seed.wrapping_add(k as u64);
            let mut v = local_checks(c, s)?;
            v.extend(nonlocal_checks(c, s)?);
            v.extend(distance_checks(c, s));
            Ok(v)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_case {
        all.extend(r?);
    }
    all.extend(kernel_checks()?);
    Ok(all)
}
