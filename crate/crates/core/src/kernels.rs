//! Radial kernels `J` for the nonlocal operator: even, nonnegative,
//! nonincreasing on `(0, ∞)`, positive near the origin, with finite second
//! moment. Each kernel carries `‖J‖₁` and `A = ½∫z²J(z)dz`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoff of the truncated Gaussian, in standard deviations.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;

/// Relative tolerance of the moment quadrature.
pub const MOMENT_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `(1 − |z|/r)⁺`
    Tent { radius: f64 },
    /// `1_{[−r, r]}`
    Indicator { radius: f64 },
    /// `exp(−z²/2σ²)` cut at `6σ`
    TruncatedGaussian { sigma: f64 },
}

impl KernelShape {
    fn eval(&self, z: f64) -> f64 {
        let z = z.abs();
        match *self {
            KernelShape::Tent { radius } => (1.0 - z / radius).max(0.0),
            KernelShape::Indicator { radius } => {
                if z <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::TruncatedGaussian { sigma } => {
                if z <= GAUSSIAN_CUTOFF * sigma {
                    (-0.5 * (z / sigma).powi(2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> f64 {
        match *self {
            KernelShape::Tent { radius } | KernelShape::Indicator { radius } => radius,
            KernelShape::TruncatedGaussian { sigma } => GAUSSIAN_CUTOFF * sigma,
        }
    }
}

/// Optional parameters of the built-in kernels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    height: f64,
    support_radius: f64,
    l1_norm: f64,
    second_moment_half: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Inadmissible(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Builds `tent`, `indicator` or `truncated_gaussian`.
pub fn builtin_kernel(name: &str, params: &KernelParams) -> Result<Kernel> {
    let height = positive("height", params.height.unwrap_or(1.0))?;
    let shape = match name {
        "tent" => KernelShape::Tent {
            radius: positive("radius", params.radius.unwrap_or(1.0))?,
        },
        "indicator" => KernelShape::Indicator {
            radius: positive("radius", params.radius.unwrap_or(1.0))?,
        },
        "truncated_gaussian" | "gaussian" => KernelShape::TruncatedGaussian {
            sigma: positive("sigma", params.sigma.unwrap_or(1.0))?,
        },
        other => return Err(Error::UnknownKernel(other.to_string())),
    };
    Kernel::new(shape, height)
}

impl Kernel {
    pub fn new(shape: KernelShape, height: f64) -> Result<Kernel> {
        let support_radius = shape.support();
        let (l1, second) = match shape {
            KernelShape::Tent { radius: r } => (height * r, height * r.powi(3) / 6.0),
            KernelShape::Indicator { radius: r } => (2.0 * height * r, 2.0 * height * r.powi(3) / 3.0),
            KernelShape::TruncatedGaussian { .. } => {
                let l1 = 2.0 * adaptive_simpson(|z| height * shape.eval(z), 0.0, support_radius, MOMENT_RTOL);
                let m2 = 2.0
                    * adaptive_simpson(|z| z * z * height * shape.eval(z), 0.0, support_radius, MOMENT_RTOL);
                (l1, m2)
            }
        };
        let kernel = Kernel {
            shape,
            height,
            support_radius,
            l1_norm: l1,
            second_moment_half: 0.5 * second,
        };
        kernel.check_admissible()?;
        Ok(kernel)
    }

    pub fn tent() -> Kernel {
        builtin_kernel("tent", &KernelParams::default()).expect("tent is admissible")
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// `A = ½∫z²J(z)dz`.
    pub fn second_moment_half(&self) -> f64 {
        self.second_moment_half
    }

    /// `J(z)`.
    pub fn profile(&self, z: f64) -> f64 {
        self.height * self.shape.eval(z)
    }

    /// `ε⁻³ J(r/ε)` without parameter checks.
    #[inline]
    pub fn eval_rescaled(&self, epsilon: f64, r: f64) -> f64 {
        self.profile(r / epsilon) / (epsilon * epsilon * epsilon)
    }

    /// `J_ε(r) = ε⁻³ J(r/ε)`.
    pub fn rescaled(&self, epsilon: f64, r: f64) -> Result<f64> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidParameter(format!("distance must be nonnegative, got {r}")));
        }
        Ok(self.eval_rescaled(epsilon, r))
    }

    pub fn rescaled_support(&self, epsilon: f64) -> f64 {
        epsilon * self.support_radius
    }

    /// `c·J` with `c = 1/A`, so that `½∫z²J = 1`.
    pub fn normalize_unit_second_moment(&self) -> Result<Kernel> {
        let a = self.second_moment_half;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Inadmissible(format!("second moment must be positive, got {a}")));
        }
        let c = 1.0 / a;
        Ok(Kernel {
            height: self.height * c,
            l1_norm: self.l1_norm * c,
            second_moment_half: 1.0,
            ..self.clone()
        })
    }

    fn check_admissible(&self) -> Result<()> {
        if self.profile(0.0) <= 0.0 {
            return Err(Error::Inadmissible("J(0) must be positive".into()));
        }
        let n = 2000;
        let mut prev = self.profile(0.0);
        for k in 1..=n {
            let z = 1.2 * self.support_radius * k as f64 / n as f64;
            let v = self.profile(z);
            if v < 0.0 || v > prev || self.profile(-z) != v {
                return Err(Error::Inadmissible(format!(
                    "profile not even, nonnegative and nonincreasing near z = {z}"
                )));
            }
            prev = v;
        }
        for (name, v) in [("L1 norm", self.l1_norm), ("second moment", self.second_moment_half)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Inadmissible(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Adaptive Simpson quadrature with relative tolerance `rtol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let coarse = simpson(fa, fm, fb, a, b);
    // seed the absolute tolerance from a moderately refined estimate
    let n = 64;
    let h = (b - a) / n as f64;
    let estimate: f64 = (0..n)
        .map(|k| {
            let x0 = a + k as f64 * h;
            simpson(f(x0), f(x0 + 0.5 * h), f(x0 + h), x0, x0 + h)
        })
        .sum();
    let tol = rtol * estimate.abs().max(coarse.abs()).max(f64::MIN_POSITIVE);
    recurse(&f, a, b, fa, fm, fb, coarse, tol, 30)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tent_moments() {
        let k = Kernel::tent();
        assert!((k.l1_norm() - 1.0).abs() < 1e-15);
        assert!((k.second_moment_half() - 1.0 / 12.0).abs() < 1e-15);
        let n = k.normalize_unit_second_moment().unwrap();
        assert!((n.height() - 12.0).abs() < 1e-12);
        assert!((n.second_moment_half() - 1.0).abs() < 1e-15);
        assert!((n.l1_norm() - 12.0).abs() < 1e-12);
        let again = n.normalize_unit_second_moment().unwrap();
        assert_eq!(again, n);
    }

    #[test]
    fn indicator_with_height_three_has_unit_moment() {
        let k = builtin_kernel(
            "indicator",
            &KernelParams {
                height: Some(3.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((k.second_moment_half() - 1.0).abs() < 1e-15);
        let recheck = adaptive_simpson(|z| z * z * k.profile(z), 0.0, 1.0, 1e-12);
        assert!((recheck - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rescaled_values() {
        let k = Kernel::tent();
        assert_eq!(k.rescaled(1.0, 0.3).unwrap(), k.profile(0.3));
        assert!((k.rescaled(0.5, 0.0).unwrap() - 8.0).abs() < 1e-15);
        assert_eq!(k.rescaled_support(0.25), 0.25);
        assert!(k.rescaled(0.0, 0.1).is_err());
        assert!(k.rescaled(-1.0, 0.1).is_err());
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(
            builtin_kernel("cauchy", &KernelParams::default()),
            Err(Error::UnknownKernel(_))
        ));
        let bad = KernelParams {
            radius: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(builtin_kernel("tent", &bad), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn simpson_polynomial_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
    }
}
