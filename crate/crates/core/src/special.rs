//! Special functions and distribution functions.
//!
//! All Bessel work happens in log space: `log I_ν(κ)` overflows linear
//! space for κ beyond a few hundred, and the sample sizes of interest push
//! arguments well past that. The central quantity is
//!
//! ```text
//! H_ν(κ) = Γ(ν+1) I_ν(κ) / (κ/2)^ν = Σ_k (κ²/4)^k Γ(ν+1) / (k! Γ(k+ν+1)),
//! ```
//!
//! whose series has positive terms and starts at 1, so `log H_ν` is computed
//! without cancellation for every `ν`. Gamma, the incomplete gamma and beta
//! functions and `erfc` come from `statrs`.

use statrs::function::{beta, erf, gamma};

use crate::error::{Error, Result};
use crate::quadrature;

/// Above this argument the series gives way to asymptotic expansions.
const SERIES_MAX_KAPPA: f64 = 1.0e4;
const MAX_SERIES_TERMS: usize = 1_000_000;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Lower and upper bound on `log H_ν(κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

impl BoundPair {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

/// ζ(2), ζ(3), …, ζ(40).
#[allow(clippy::excessive_precision)]
const ZETA: [f64; 39] = [
    1.6449340668482264365,
    1.2020569031595942854,
    1.0823232337111381915,
    1.0369277551433699263,
    1.0173430619844491397,
    1.0083492773819228268,
    1.0040773561979443394,
    1.0020083928260822144,
    1.0009945751278180853,
    1.0004941886041194646,
    1.0002460865533080483,
    1.0001227133475784891,
    1.0000612481350587048,
    1.0000305882363070205,
    1.0000152822594086519,
    1.0000076371976378998,
    1.0000038172932649998,
    1.0000019082127165539,
    1.0000009539620338728,
    1.0000004769329867878,
    1.0000002384505027277,
    1.0000001192199259653,
    1.0000000596081890513,
    1.0000000298035035147,
    1.0000000149015548284,
    1.0000000074507117898,
    1.0000000037253340248,
    1.0000000018626597235,
    1.0000000009313274324,
    1.0000000004656629065,
    1.0000000002328311834,
    1.0000000001164155017,
    1.0000000000582077209,
    1.0000000000291038504,
    1.0000000000145519219,
    1.0000000000072759598,
    1.0000000000036379795,
    1.0000000000018189897,
    1.0000000000009094948,
];
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `log Γ(1+z)` for `|z| ≤ 0.5` from `-γz + Σ_{k≥2} (-1)^k ζ(k) z^k / k`.
fn lgamma1p_series(z: f64) -> f64 {
    let mut acc = 0.0;
    let mut pow = -z;
    for k in 2..=64 {
        pow *= -z;
        let zeta = match ZETA.get(k - 2) {
            Some(v) => *v,
            None => 1.0 + 2f64.powi(-(k as i32)) + 3f64.powi(-(k as i32)),
        };
        acc += zeta * pow / k as f64;
    }
    acc - EULER_GAMMA * z
}

/// Infallible `log Γ(x)` for internal callers with `x > 0`.
///
/// On `[0.5, 2.5]` a Taylor series about 1 or 2 keeps the relative error small
/// near the zeros; elsewhere the Lanczos approximation from `statrs` is used.
pub(crate) fn lgamma(x: f64) -> f64 {
    if (0.5..1.5).contains(&x) {
        lgamma1p_series(x - 1.0)
    } else if (1.5..=2.5).contains(&x) {
        let z = x - 2.0;
        lgamma1p_series(z) + z.ln_1p()
    } else {
        gamma::ln_gamma(x)
    }
}

pub fn log_gamma(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    if x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(lgamma(x))
}

/// `log Σ_k (κ²/4)^k Γ(ν+1)/(k! Γ(k+ν+1))` for `κ > 0`.
fn log_h_series(nu: f64, kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut head = 1.0_f64;
    let mut tail = 0.0_f64;
    let mut term = 1.0_f64;
    let mut log_scale = 0.0_f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let ratio = q / ((kf + 1.0) * (kf + nu + 1.0));
        term *= ratio;
        tail += term;
        if tail > 1e280 {
            head *= 1e-280;
            tail *= 1e-280;
            term *= 1e-280;
            log_scale += 280.0 * std::f64::consts::LN_10;
        }
        if ratio < 1.0 && term <= 1e-17 * (head + tail) {
            break;
        }
    }
    if log_scale == 0.0 {
        tail.ln_1p()
    } else {
        log_scale + (head + tail).ln()
    }
}

/// Debye uniform expansion of `log I_ν(νz)`; accurate for large `ν`.
fn log_bessel_i_debye(nu: f64, kappa: f64) -> f64 {
    let z = kappa / nu;
    let w = z.hypot(1.0);
    let t = 1.0 / w;
    let eta = w + (z / (1.0 + w)).ln();
    let t2 = t * t;
    let u1 = t * (3.0 - 5.0 * t2) / 24.0;
    let u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
    let u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2)
        / 414720.0;
    let u4 = t2
        * t2
        * (4465125.0 - 94121676.0 * t2 + 349922430.0 * t2 * t2 - 446185740.0 * t2.powi(3)
            + 185910725.0 * t2.powi(4))
        / 39813120.0;
    let s = 1.0 + u1 / nu + u2 / nu.powi(2) + u3 / nu.powi(3) + u4 / nu.powi(4);
    -0.5 * (LN_2PI + nu.ln()) + nu * eta - 0.5 * w.ln() + s.ln()
}

/// Large-argument expansion of `log I_ν(κ)`, for `κ ≫ ν²`.
fn log_bessel_i_hankel(nu: f64, kappa: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * kappa);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    kappa - 0.5 * (LN_2PI + kappa.ln()) + sum.ln()
}

/// `log I_ν(κ)` for `κ > SERIES_MAX_KAPPA`.
fn log_bessel_i_asymptotic(nu: f64, kappa: f64) -> f64 {
    if nu >= 15.0 {
        log_bessel_i_debye(nu, kappa)
    } else {
        log_bessel_i_hankel(nu, kappa)
    }
}

/// `log I_ν(κ)`, modified Bessel function of the first kind.
///
/// The positive-term power series is summed for `κ ≤ 10⁴`; beyond that the
/// Debye expansion (`ν ≥ 15`) or the Hankel expansion is used. `I_ν(0) = 0`
/// for `ν > 0`, so the result is `-∞` there.
pub fn log_bessel_i(nu: f64, kappa: f64) -> Result<f64> {
    check_finite("nu", nu)?;
    check_finite("kappa", kappa)?;
    if nu < 0.0 || kappa < 0.0 {
        return Err(Error::Domain(format!(
            "log_bessel_i needs nu >= 0 and kappa >= 0, got ({nu}, {kappa})"
        )));
    }
    if kappa == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if kappa > SERIES_MAX_KAPPA {
        return Ok(log_bessel_i_asymptotic(nu, kappa));
    }
    Ok(nu * (0.5 * kappa).ln() - lgamma(nu + 1.0) + log_h_series(nu, kappa))
}

/// `log H_ν(κ)` with `H_ν(κ) = Γ(ν+1) I_ν(κ) / (κ/2)^ν`; `H_ν(0) = 1`.
pub fn log_h(nu: f64, kappa: f64) -> Result<f64> {
    check_finite("nu", nu)?;
    check_finite("kappa", kappa)?;
    if nu < 0.0 || kappa < 0.0 {
        return Err(Error::Domain(format!(
            "log_h needs nu >= 0 and kappa >= 0, got ({nu}, {kappa})"
        )));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa > SERIES_MAX_KAPPA {
        return Ok(lgamma(nu + 1.0) + log_bessel_i_asymptotic(nu, kappa) - nu * (0.5 * kappa).ln());
    }
    Ok(log_h_series(nu, kappa))
}

/// `x - log(1 + x)` without cancellation for small `x`.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // x²/2 - x³/3 + x⁴/4 - ...
        let mut acc = 0.0;
        let mut pow = x * x;
        for k in 2..12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * pow / k as f64;
            pow *= x;
        }
        acc
    } else {
        x - x.ln_1p()
    }
}

/// `S_{α,β}(κ) = √(κ²+β²) - α log(α+√(κ²+β²)) - β + α log(α+β)`, evaluated
/// as `d β/(α+β) + α (x - log1p x)` with `d = κ²/(√(κ²+β²)+β)` and
/// `x = d/(α+β)` so that small `κ` does not cancel.
pub fn amos_s(alpha: f64, beta: f64, kappa: f64) -> f64 {
    let r = kappa.hypot(beta);
    let d = kappa * kappa / (r + beta);
    if alpha == 0.0 {
        return d;
    }
    let x = d / (alpha + beta);
    d * beta / (alpha + beta) + alpha * x_minus_log1p(x)
}

/// `S_{ν+1/2, ν+3/2}(κ) ≤ log H_ν(κ) ≤ S_{ν, ν+2}(κ)`.
pub fn amos_bounds(nu: f64, kappa: f64) -> BoundPair {
    BoundPair {
        lower: amos_s(nu + 0.5, nu + 1.5, kappa),
        upper: amos_s(nu, nu + 2.0, kappa),
    }
}

fn check_p(p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
    }
    Ok(())
}

/// `log c_p` with `c_p = Γ(p/2) / (√π Γ((p-1)/2))`.
pub fn log_c_p(p: usize) -> Result<f64> {
    check_p(p)?;
    let pf = p as f64;
    Ok(lgamma(0.5 * pf) - 0.5 * LN_PI - lgamma(0.5 * (pf - 1.0)))
}

/// `log c^{FvML}_{p,κ} = log c_p - log H_{p/2-1}(κ)`.
pub fn log_c_fvml(p: usize, kappa: f64) -> Result<f64> {
    let lc = log_c_p(p)?;
    Ok(lc - log_h(0.5 * p as f64 - 1.0, kappa)?)
}

/// Panel count for angle-space integrals; the integrand's peak narrows like
/// `1/√(p + κ)`.
pub(crate) fn radial_panels(p: usize, kappa: f64) -> usize {
    (((p as f64 + kappa.abs()).sqrt() / 6.0).ceil() as usize).clamp(1, 256)
}

/// `log ∫_{-1}^{1} (1-t²)^{(p-3)/2} f(κt) dt`, given `log f`.
///
/// The integral is taken in the angle `t = cos φ`, where the integrand
/// `sin^{p-2} φ f(κ cos φ)` has no endpoint singularity.
pub fn log_radial_integral<L: Fn(f64) -> f64>(p: usize, kappa: f64, log_f: L) -> Result<f64> {
    check_p(p)?;
    let pm2 = (p - 2) as f64;
    let g = |phi: f64| {
        let base = if p == 2 { 0.0 } else { pm2 * phi.sin().ln() };
        base + log_f(kappa * phi.cos())
    };
    let panels = radial_panels(p, kappa);
    let v = quadrature::log_integrate(g, 0.0, std::f64::consts::PI, panels, 1e-12)?;
    if v.is_nan() {
        return Err(Error::Domain("f must be positive on [-kappa, kappa]".into()));
    }
    Ok(v)
}

/// `c_{p,κ,f} = 1 / ∫_{-1}^{1} (1-t²)^{(p-3)/2} f(κt) dt`.
pub fn norm_const_general<F: Fn(f64) -> f64>(p: usize, kappa: f64, f: F) -> Result<f64> {
    Ok(log_norm_const_general(p, kappa, f)?.exp())
}

pub fn log_norm_const_general<F: Fn(f64) -> f64>(p: usize, kappa: f64, f: F) -> Result<f64> {
    check_finite("kappa", kappa)?;
    if kappa < 0.0 {
        return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
    }
    let li = log_radial_integral(p, kappa, |s| {
        let v = f(s);
        if v > 0.0 {
            v.ln()
        } else {
            f64::NAN
        }
    })?;
    Ok(-li)
}

/// CDF of `u = X'θ` under uniformity on `S^{p-1}`.
pub fn f_p_cdf(p: usize, t: f64) -> Result<f64> {
    check_p(p)?;
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [-1, 1], got {t}")));
    }
    if t == -1.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let a = 0.5 * (p as f64 - 1.0);
    // evaluate on the lower half and reflect, so F(-t) = 1 - F(t) exactly
    let lower = beta::beta_reg(a, a, 0.5 * (1.0 - t.abs()));
    Ok(if t < 0.0 { lower } else { 1.0 - lower })
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - 0.5 * LN_2PI).exp()
}

/// `Φ(z)`.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 - Φ(z)`, accurate in the upper tail.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `Φ^{-1}(q)`: inverse-erfc starting value refined by Halley steps.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * q);
    for _ in 0..6 {
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        // residual from the tail that is small, to keep relative precision
        let resid = if x > 0.0 {
            (1.0 - q) - std_normal_sf(x)
        } else {
            std_normal_cdf(x) - q
        };
        // Halley step; the log-density derivative of φ is -x
        let t = resid / pdf;
        let step = t / (1.0 + 0.5 * x * t);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn check_chisq(df: usize, x: f64) -> Result<()> {
    if df == 0 {
        return Err(Error::Domain("degrees of freedom must be >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(())
}

fn chisq_cdf_raw(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma::gamma_lr(0.5 * df, 0.5 * x)
    }
}

fn chisq_sf_raw(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma::gamma_ur(0.5 * df, 0.5 * x)
    }
}

/// `Ψ_p(x)`, the χ²_p distribution function.
pub fn chisq_cdf(df: usize, x: f64) -> Result<f64> {
    check_chisq(df, x)?;
    Ok(chisq_cdf_raw(df as f64, x))
}

/// `1 - Ψ_p(x)`.
pub fn chisq_sf(df: usize, x: f64) -> Result<f64> {
    check_chisq(df, x)?;
    Ok(chisq_sf_raw(df as f64, x))
}

fn chisq_pdf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * df;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - lgamma(k)).exp()
}

/// `Ψ_p^{-1}(q)` by Newton iteration safeguarded with a bisection bracket.
pub fn chisq_quantile(df: usize, q: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("degrees of freedom must be >= 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let k = df as f64;
    if df == 2 {
        return Ok(-2.0 * (-q).ln_1p());
    }
    let upper = q > 0.5;
    // signed residual; uses the survival function in the upper half
    let resid = |x: f64| {
        if upper {
            (1.0 - q) - chisq_sf_raw(k, x)
        } else {
            chisq_cdf_raw(k, x) - q
        }
    };
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Wilson–Hilferty start
    let z = std_normal_quantile(q)?;
    let c = 2.0 / (9.0 * k);
    let mut x = (k * (1.0 - c + z * c.sqrt()).powi(3)).clamp(lo, hi);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chisq_pdf(k, x);
        let mut next = if d > 0.0 { x - r / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Poisson(λ) weights `w_k` in increasing `k`, stopping once `k > λ` and the
/// unassigned mass falls below `1e-14` (at most `10⁶` terms).
fn poisson_weights(lambda: f64) -> impl Iterator<Item = (usize, f64)> {
    let ln_l = lambda.ln();
    let mut cum = 0.0;
    let mut done = false;
    (0..MAX_SERIES_TERMS).map_while(move |k| {
        if done {
            return None;
        }
        let kf = k as f64;
        let w = (-lambda + kf * ln_l - lgamma(kf + 1.0)).exp();
        cum += w;
        if kf > lambda && 1.0 - cum < 1e-14 {
            done = true;
        }
        Some((k, w))
    })
}

fn check_noncentral(df: usize, delta: f64, x: f64) -> Result<()> {
    check_chisq(df, x)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "non-centrality must be finite and >= 0, got {delta}"
        )));
    }
    Ok(())
}

/// CDF of χ²_p(δ) as the Poisson(δ/2) mixture `Σ_k w_k Ψ_{p+2k}(x)`.
pub fn noncentral_chisq_cdf(df: usize, delta: f64, x: f64) -> Result<f64> {
    check_noncentral(df, delta, x)?;
    if delta == 0.0 {
        return Ok(chisq_cdf_raw(df as f64, x));
    }
    let k0 = df as f64;
    let s: f64 = poisson_weights(0.5 * delta)
        .map(|(k, w)| w * chisq_cdf_raw(k0 + 2.0 * k as f64, x))
        .sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Upper tail of χ²_p(δ), same mixture on survival functions.
pub fn noncentral_chisq_sf(df: usize, delta: f64, x: f64) -> Result<f64> {
    check_noncentral(df, delta, x)?;
    if delta == 0.0 {
        return Ok(chisq_sf_raw(df as f64, x));
    }
    let k0 = df as f64;
    let s: f64 = poisson_weights(0.5 * delta)
        .map(|(k, w)| w * chisq_sf_raw(k0 + 2.0 * k as f64, x))
        .sum();
    Ok(s.clamp(0.0, 1.0))
}
