//! Kernel norms and moments against composite Gauss–Legendre quadrature.

use graphdiff::{builtin_kernel, Kernel, KernelParams};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(16);
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            rule.iter().map(|&(x, wt)| wt * f(mid + half * x)).sum::<f64>() * half
        })
        .sum()
}

fn kernels() -> Vec<(String, Kernel)> {
    let mut out = Vec::new();
    for r in [0.5, 1.0, 2.5] {
        let p = KernelParams {
            radius: Some(r),
            height: Some(1.7),
            ..Default::default()
        };
        out.push((format!("tent r={r}"), builtin_kernel("tent", &p).unwrap()));
        out.push((format!("indicator r={r}"), builtin_kernel("indicator", &p).unwrap()));
    }
    for s in [0.3, 1.0, 2.0] {
        let p = KernelParams {
            sigma: Some(s),
            ..Default::default()
        };
        out.push((format!("gaussian sigma={s}"), builtin_kernel("truncated_gaussian", &p).unwrap()));
    }
    out
}

#[test]
fn gauss_legendre_is_exact_on_polynomials() {
    let v = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1);
    let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
    assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
}

#[test]
fn norms_and_moments_match_quadrature() {
    for (name, k) in kernels() {
        let r = k.support_radius();
        // panel edges land on the support boundary, where the kinks are
        let l1 = 2.0 * integrate(|z| k.profile(z), 0.0, r, 64);
        let a = integrate(|z| z * z * k.profile(z), 0.0, r, 64);
        assert!((l1 - k.l1_norm()).abs() <= 1e-8 * l1, "{name}: {l1} vs {}", k.l1_norm());
        assert!(
            (a - k.second_moment_half()).abs() <= 1e-8 * a,
            "{name}: {a} vs {}",
            k.second_moment_half()
        );
    }
}

#[test]
fn rescaled_kernels_keep_the_second_moment() {
    for (name, k) in kernels() {
        for eps in [0.1, 0.4, 3.0] {
            let support = k.rescaled_support(eps);
            assert!((support - eps * k.support_radius()).abs() < 1e-14);
            let m = integrate(|s| s * s * k.eval_rescaled(eps, s), 0.0, support, 64);
            assert!(
                (m - k.second_moment_half()).abs() <= 1e-8 * m,
                "{name} eps={eps}: {m} vs {}",
                k.second_moment_half()
            );
            // mass grows like 1/ε²
            let mass = 2.0 * integrate(|s| k.eval_rescaled(eps, s), 0.0, support, 64);
            assert!((mass * eps * eps - k.l1_norm()).abs() <= 1e-8 * k.l1_norm());
        }
    }
}

#[test]
fn normalization_gives_unit_moment() {
    for (name, k) in kernels() {
        let n = k.normalize_unit_second_moment().unwrap();
        let a = integrate(|z| z * z * n.profile(z), 0.0, n.support_radius(), 64);
        assert!((a - 1.0).abs() < 1e-8, "{name}: {a}");
        assert!((n.second_moment_half() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn unit_tent_closed_form() {
    // J = (1 − |z|)⁺: ‖J‖₁ = 1, A = ½·2·∫₀¹ z²(1 − z) dz = 1/12
    let k = Kernel::tent();
    assert!((k.l1_norm() - 1.0).abs() < 1e-15);
    assert!((k.second_moment_half() - 1.0 / 12.0).abs() < 1e-15);
}
