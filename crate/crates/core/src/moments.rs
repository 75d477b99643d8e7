//! Moments of `u = X'θ` and `v² = 1 - u²`, the mean and variance of the
//! standardized Rayleigh statistic, and the CLT condition diagnostics.

use serde::{Deserialize, Serialize};

use crate::distributions::{solve_beta_shapes, RadialLaw};
use crate::error::{Error, Result};
use crate::quadrature::{self, scan_max};
use crate::special::radial_panels;
use crate::sphere::{dot, SphericalSample, UnitVector};

const MOMENT_TOL: f64 = 1e-13;

/// `e_k = E[u^k]`, `ẽ_k = E[(u - e1)^k]`, `f_k = E[(1 - u²)^{k/2}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub e1: f64,
    pub e2: f64,
    pub e_tilde2: f64,
    pub e_tilde4: f64,
    pub f2: f64,
    pub f4: f64,
}

/// Exact moments of the radial law in dimension `p`.
///
/// Rotationally symmetric laws are integrated in the angle `φ = arccos u`;
/// the beta-matched law has closed-form moments.
pub fn moments_quadrature(radial: &RadialLaw, p: usize) -> Result<MomentSet> {
    radial.validate()?;
    if p < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
    }
    if let RadialLaw::BetaMatched { e1, p: q } = radial {
        if *q != p {
            return Err(Error::DimensionMismatch { expected: *q, found: p });
        }
        return beta_moments(*e1, p);
    }
    let g = radial.log_angle_density(p).expect("non-beta law");
    let kappa = match radial {
        RadialLaw::Fvml { kappa } | RadialLaw::CustomMonotone { kappa, .. } => *kappa,
        _ => 0.0,
    };
    let pi = std::f64::consts::PI;
    let shift = scan_max(&|x| g(x), 0.0, pi);
    if !shift.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "angle log-density maximum is {shift}"
        )));
    }
    let panels = radial_panels(p, kappa);
    let expect = |h: &dyn Fn(f64) -> f64| -> Result<f64> {
        quadrature::integrate_panels(|x| h(x) * (g(x) - shift).exp(), 0.0, pi, panels, MOMENT_TOL)
    };
    let z = expect(&|_| 1.0)?;
    let e1 = expect(&|x| x.cos())? / z;
    let e2 = expect(&|x| x.cos().powi(2))? / z;
    let e_tilde2 = expect(&|x| (x.cos() - e1).powi(2))? / z;
    let e_tilde4 = expect(&|x| (x.cos() - e1).powi(4))? / z;
    let f2 = expect(&|x| x.sin().powi(2))? / z;
    let f4 = expect(&|x| x.sin().powi(4))? / z;
    Ok(MomentSet {
        e1,
        e2,
        e_tilde2,
        e_tilde4,
        f2,
        f4,
    })
}

/// Closed-form moments of `u = 2B - 1`, `B ~ Beta(a, b)`.
fn beta_moments(e1: f64, p: usize) -> Result<MomentSet> {
    let (a, b) = solve_beta_shapes(e1, p)?;
    let s = a + b;
    let var_b = a * b / (s * s * (s + 1.0));
    let mu4_b = 3.0 * a * b * (a * b * (s - 6.0) + 2.0 * s * s)
        / (s.powi(4) * (s + 1.0) * (s + 2.0) * (s + 3.0));
    let e_tilde2 = 4.0 * var_b;
    let e2 = e_tilde2 + e1 * e1;
    // 1 - u² = 4B(1-B)
    let f2 = 4.0 * a * b / (s * (s + 1.0));
    let f4 = 16.0 * a * (a + 1.0) * b * (b + 1.0) / (s * (s + 1.0) * (s + 2.0) * (s + 3.0));
    Ok(MomentSet {
        e1,
        e2,
        e_tilde2,
        e_tilde4: 16.0 * mu4_b,
        f2,
        f4,
    })
}

/// Plug-in sample moments of `u_i = X_i'θ`.
pub fn moments_empirical(sample: &SphericalSample, theta: &UnitVector) -> Result<MomentSet> {
    sample.check_dim(theta.dim())?;
    let n = sample.n() as f64;
    let u: Vec<f64> = sample.rows().map(|r| dot(r, theta.as_slice()).clamp(-1.0, 1.0)).collect();
    let e1 = u.iter().sum::<f64>() / n;
    let e2 = u.iter().map(|x| x * x).sum::<f64>() / n;
    let e_tilde2 = u.iter().map(|x| (x - e1).powi(2)).sum::<f64>() / n;
    let e_tilde4 = u.iter().map(|x| (x - e1).powi(4)).sum::<f64>() / n;
    let v2: Vec<f64> = u.iter().map(|x| (1.0 - x) * (1.0 + x)).collect();
    let f2 = v2.iter().sum::<f64>() / n;
    let f4 = v2.iter().map(|x| x * x).sum::<f64>() / n;
    Ok(MomentSet {
        e1,
        e2,
        e_tilde2,
        e_tilde4,
        f2,
        f4,
    })
}

/// Leading-order mean and variance of `R^St`:
/// `(n-1)√p e1²/√2` and `p ẽ2² + 2np e1² ẽ2 + f2²`.
pub fn rayleigh_mean_var(m: &MomentSet, n: usize, p: usize) -> (f64, f64) {
    let (nf, pf) = (n as f64, p as f64);
    let mean = (nf - 1.0) * pf.sqrt() * m.e1 * m.e1 / std::f64::consts::SQRT_2;
    let var = pf * m.e_tilde2 * m.e_tilde2 + 2.0 * nf * pf * m.e1 * m.e1 * m.e_tilde2 + m.f2 * m.f2;
    (mean, var)
}

/// Exact finite-sample variance of `R^St` for i.i.d. rotationally symmetric
/// rows: `p(n-1)/n · {e2² - e1⁴ + 2(n-2) e1² ẽ2 + f2²/(p-1)}`.
pub fn rayleigh_var_exact(m: &MomentSet, n: usize, p: usize) -> Result<f64> {
    if n < 2 || p < 2 {
        return Err(Error::Domain(format!("need n >= 2 and p >= 2, got n={n}, p={p}")));
    }
    let (nf, pf) = (n as f64, p as f64);
    let e1sq = m.e1 * m.e1;
    Ok(pf * (nf - 1.0) / nf
        * (m.e2 * m.e2 - e1sq * e1sq
            + 2.0 * (nf - 2.0) * e1sq * m.e_tilde2
            + m.f2 * m.f2 / (pf - 1.0)))
}

/// The three quantities whose smallness drives asymptotic normality of
/// `R^St`: `min(p ẽ2²/f2², ẽ2/(n e1²))`, `ẽ4/(n ẽ2²)` and `f4/(n f2²)`.
///
/// With `e1 = 0` the second argument of the minimum is taken as `+∞`.
pub fn condition_diagnostics(m: &MomentSet, n: usize, p: usize) -> Result<(f64, f64, f64)> {
    if m.f2 == 0.0 {
        return Err(Error::DegenerateMoments("f2 = 0 (u is ±1 almost surely)".into()));
    }
    if m.e_tilde2 == 0.0 {
        return Err(Error::DegenerateMoments("e~2 = 0 (u is a point mass)".into()));
    }
    let (nf, pf) = (n as f64, p as f64);
    let a = pf * m.e_tilde2 * m.e_tilde2 / (m.f2 * m.f2);
    let b = if m.e1 == 0.0 {
        f64::INFINITY
    } else {
        m.e_tilde2 / (nf * m.e1 * m.e1)
    };
    Ok((
        a.min(b),
        m.e_tilde4 / (nf * m.e_tilde2 * m.e_tilde2),
        m.f4 / (nf * m.f2 * m.f2),
    ))
}

/// Small-`κ` approximations of `(e1, e2)` for the law with density
/// proportional to `(1-u²)^{(p-3)/2} f(κu)`:
/// `(κ/p)/(1 + κ² f''(0)/(2p))` and `(1/p)/(1 + κ² f''(0)/(2p))`.
///
/// `f''(0)` is estimated by a central difference at `h = 1e-4` when not given.
pub fn local_alternative_map<F: Fn(f64) -> f64>(
    kappa: f64,
    p: usize,
    f: F,
    f2_at_zero: Option<f64>,
) -> (f64, f64) {
    let fpp = f2_at_zero.unwrap_or_else(|| {
        let h = 1e-4;
        (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
    });
    let pf = p as f64;
    let denom = 1.0 + kappa * kappa * fpp / (2.0 * pf);
    (kappa / pf / denom, 1.0 / pf / denom)
}
