//! Asymptotic power functions and the maps from concentration to the local
//! parameter `τ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chisq_quantile, noncentral_chisq_sf, std_normal_quantile, std_normal_sf};

/// How `κ` shrinks with `(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `κ = τ√(p/n)`: the specified-`θ` contiguity rate.
    Contiguous,
    /// `κ = τ p^{3/4}/√n`: the rate at which invariant tests gain power.
    Detectable,
}

/// Which asymptotic power function a curve traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Specified,
    Highdim,
    Fixedp { p: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub alpha: f64,
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

fn check(tau: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
    }
    Ok(())
}

/// `1 - Φ(z_α - τ)`.
pub fn power_specified(tau: f64, alpha: f64) -> Result<f64> {
    check(tau, alpha)?;
    if tau == 0.0 {
        return Ok(alpha);
    }
    Ok(std_normal_sf(std_normal_quantile(1.0 - alpha)? - tau))
}

/// `1 - Φ(z_α - τ²/√2)`.
pub fn power_highdim_rayleigh(tau: f64, alpha: f64) -> Result<f64> {
    check(tau, alpha)?;
    if tau == 0.0 {
        return Ok(alpha);
    }
    Ok(std_normal_sf(
        std_normal_quantile(1.0 - alpha)? - tau * tau / std::f64::consts::SQRT_2,
    ))
}

/// `P[Y > χ²_{p;1-α}]` with `Y ~ χ²_p(τ²)`.
pub fn power_fixedp_rayleigh(p: usize, tau: f64, alpha: f64) -> Result<f64> {
    check(tau, alpha)?;
    if tau == 0.0 {
        return Ok(alpha);
    }
    let c = chisq_quantile(p, 1.0 - alpha)?;
    noncentral_chisq_sf(p, tau * tau, c)
}

/// `τ` such that `κ` equals the regime's rate times `τ`.
pub fn tau_from_kappa(kappa: f64, n: usize, p: usize, regime: Regime) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("need n, p >= 1, got n={n}, p={p}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    let (nf, pf) = (n as f64, p as f64);
    Ok(match regime {
        Regime::Contiguous => kappa * (nf / pf).sqrt(),
        Regime::Detectable => kappa * nf.sqrt() / pf.powf(0.75),
    })
}

/// Inverse of [`tau_from_kappa`].
pub fn kappa_from_tau(tau: f64, n: usize, p: usize, regime: Regime) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("need n, p >= 1, got n={n}, p={p}")));
    }
    let (nf, pf) = (n as f64, p as f64);
    Ok(match regime {
        Regime::Contiguous => tau * (pf / nf).sqrt(),
        Regime::Detectable => tau * pf.powf(0.75) / nf.sqrt(),
    })
}

impl PowerCurve {
    pub fn evaluate(kind: CurveKind, alpha: f64, taus: &[f64]) -> Result<Self> {
        let values = taus
            .iter()
            .map(|&t| match kind {
                CurveKind::Specified => power_specified(t, alpha),
                CurveKind::Highdim => power_highdim_rayleigh(t, alpha),
                CurveKind::Fixedp { p } => power_fixedp_rayleigh(p, t, alpha),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PowerCurve {
            alpha,
            taus: taus.to_vec(),
            values,
        })
    }
}
