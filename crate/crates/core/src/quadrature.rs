//! Gauss–Legendre quadrature.
//!
//! Nodes come from Newton iteration on the Legendre recurrence. The adaptive
//! driver compares a 256-node rule on `[a, b]` with the same rule on the two
//! halves and allows one further bisection level before giving up.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.integrate_with_abs(f, a, b).0
    }

    /// Returns `(∫f, ∫|f|)` under the same rule.
    pub fn integrate_with_abs<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        let mut sa = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = w * f(mid + half * x);
            s += v;
            sa += v.abs();
        }
        (s * half, sa * half.abs())
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gl256() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(256))
}

pub(crate) fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// The error estimate is measured against `max(|∫f|, ∫|f|)`, so integrals
/// that vanish by symmetry still converge.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    integrate_with_floor(f, a, b, rel_tol, 0.0)
}

/// As [`integrate`], but an error estimate below `abs_tol` is always accepted.
pub fn integrate_with_floor<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let rule = gl256();
    let m = 0.5 * (a + b);
    let whole = rule.integrate(&f, a, b);
    let (l, la) = rule.integrate_with_abs(&f, a, m);
    let (r, ra) = rule.integrate_with_abs(&f, m, b);
    let halves = l + r;
    let scale = halves.abs().max(la + ra);
    let allowed = (rel_tol * scale).max(abs_tol);
    if !halves.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    if (whole - halves).abs() <= allowed {
        return Ok(halves);
    }
    // one fallback bisection level
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for (lo, hi, coarse) in [(a, m, l), (m, b, r)] {
        let mid = 0.5 * (lo + hi);
        let fine = rule.integrate(&f, lo, mid) + rule.integrate(&f, mid, hi);
        worst = worst.max((fine - coarse).abs());
        total += fine;
    }
    if worst <= allowed {
        Ok(total)
    } else {
        Err(Error::QuadratureFailure(format!(
            "estimated error {worst:e} exceeds {rel_tol:e} x {scale:e} on [{a}, {b}]"
        )))
    }
}

/// Integrates `f` over `panels` equal pieces of `[a, b]`, each adaptively.
///
/// The tolerance is relative to the whole integral: a first pass with the
/// plain rule estimates `∫|f|`, and each panel must meet `rel_tol` times that.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
) -> Result<f64> {
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let bounds = |k: usize| {
        let lo = a + w * k as f64;
        (lo, if k + 1 == panels { b } else { lo + w })
    };
    let rule = gl256();
    let scale: f64 = (0..panels)
        .map(|k| {
            let (lo, hi) = bounds(k);
            rule.integrate_with_abs(&f, lo, hi).1
        })
        .sum();
    let floor = rel_tol * scale / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = bounds(k);
        total += integrate_with_floor(&f, lo, hi, rel_tol, floor)?;
    }
    Ok(total)
}

/// `log ∫ exp(g)` over `[a, b]` using [`integrate_panels`]. The integrand is
/// rescaled by its maximum on a scan grid to avoid overflow.
pub fn log_integrate<G: Fn(f64) -> f64>(
    g: G,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
) -> Result<f64> {
    let shift = scan_max(&g, a, b);
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !shift.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "log-integrand is not finite (max {shift})"
        )));
    }
    let total = integrate_panels(|x| (g(x) - shift).exp(), a, b, panels, rel_tol)?;
    Ok(shift + total.ln())
}

/// Maximum of `g` over the nodes of the 256-node rule on four quarters of `[a, b]`.
pub(crate) fn scan_max<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> f64 {
    let rule = gl256();
    let mut best = f64::NEG_INFINITY;
    let q = 0.25 * (b - a);
    for k in 0..4 {
        let lo = a + q * k as f64;
        let mid = lo + 0.5 * q;
        for x in rule.nodes() {
            let v = g(mid + 0.5 * q * x);
            if v > best {
                best = v;
            }
        }
    }
    best
}
