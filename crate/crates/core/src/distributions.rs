//! Samplers on the sphere and in `R^p`.
//!
//! Rotationally symmetric laws are sampled through the tangent-normal
//! construction `X = uθ + vS`. The axial part `u = X'θ` is drawn by inverting
//! a tabulated CDF in the angle `φ = arccos u`, where the density
//! `sin^{p-2}φ · f(κ cos φ)` is smooth up to both endpoints.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta as sbeta;

use crate::error::{Error, Result};
use crate::quadrature::gl8;
use crate::sphere::{dot, norm, DataMatrix, SphericalSample, UnitVector};

/// Number of grid intervals of the angle-space CDF table.
const TABLE_INTERVALS: usize = 4096;
/// Grid points whose log-density is this far below the maximum carry no mass.
const LOG_MASS_CUTOFF: f64 = 750.0;
/// Absolute tolerance of the inverse CDF, in probability.
const INVERSE_TOL: f64 = 1e-13;

/// A real function of one real variable, shared across threads.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarFn(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// Law of `u = X'θ` for a rotationally symmetric distribution.
#[derive(Debug, Clone)]
pub enum RadialLaw {
    Uniform,
    Fvml { kappa: f64 },
    /// `u = 2B - 1` with `B` beta, `E[u] = e1` and `Var[u] = 1/p`.
    BetaMatched { e1: f64, p: usize },
    /// Density proportional to `(1-u²)^{(p-3)/2} f(κu)`.
    CustomMonotone { f: ScalarFn, kappa: f64 },
}

impl RadialLaw {
    pub fn fvml(kappa: f64) -> Result<Self> {
        let law = RadialLaw::Fvml { kappa };
        law.validate()?;
        Ok(law)
    }

    pub fn beta_matched(e1: f64, p: usize) -> Result<Self> {
        let law = RadialLaw::BetaMatched { e1, p };
        law.validate()?;
        Ok(law)
    }

    pub fn custom_monotone<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        f: F,
        kappa: f64,
    ) -> Result<Self> {
        let law = RadialLaw::CustomMonotone {
            f: ScalarFn::new(f),
            kappa,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadialLaw::Uniform => Ok(()),
            RadialLaw::Fvml { kappa } => check_kappa(*kappa),
            RadialLaw::BetaMatched { e1, p } => solve_beta_shapes(*e1, *p).map(|_| ()),
            RadialLaw::CustomMonotone { f, kappa } => {
                check_kappa(*kappa)?;
                validate_monotone(f, *kappa)
            }
        }
    }

    /// Dimension fixed by the law itself, if any.
    pub fn implied_dim(&self) -> Option<usize> {
        match self {
            RadialLaw::BetaMatched { p, .. } => Some(*p),
            _ => None,
        }
    }

    /// Log-density of the angle `φ = arccos u` up to an additive constant,
    /// or `None` for the beta law, which is handled in closed form.
    pub(crate) fn log_angle_density(&self, p: usize) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        let pm2 = p as f64 - 2.0;
        let base = move |phi: f64| if pm2 == 0.0 { 0.0 } else { pm2 * phi.sin().ln() };
        match self {
            RadialLaw::Uniform => Some(Arc::new(base)),
            RadialLaw::Fvml { kappa } => {
                let k = *kappa;
                Some(Arc::new(move |phi: f64| base(phi) + k * phi.cos()))
            }
            RadialLaw::CustomMonotone { f, kappa } => {
                let (f, k) = (f.clone(), *kappa);
                Some(Arc::new(move |phi: f64| {
                    let v = f.eval(k * phi.cos());
                    if v > 0.0 {
                        base(phi) + v.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                }))
            }
            RadialLaw::BetaMatched { .. } => None,
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "concentration must be finite and >= 0, got {kappa}"
        )))
    }
}

fn validate_monotone(f: &ScalarFn, kappa: f64) -> Result<()> {
    let f0 = f.eval(0.0);
    if (f0 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("f(0) must be 1, got {f0}")));
    }
    let h = 1e-6;
    let slope = (f.eval(h) - f0) / h;
    if (slope - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "f'(0) must be 1, numerical derivative is {slope}"
        )));
    }
    if kappa > 0.0 {
        let steps = 256;
        let mut prev = f.eval(-kappa);
        if !(prev >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "f must be nonnegative on [-kappa, kappa], f(-kappa) = {prev}"
            )));
        }
        for i in 1..=steps {
            let x = -kappa + 2.0 * kappa * i as f64 / steps as f64;
            let v = f.eval(x);
            if !(v > prev) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "f must be finite and strictly increasing on [-kappa, kappa] (fails near {x})"
                )));
            }
            prev = v;
        }
    }
    Ok(())
}

/// A rotationally symmetric law on `S^{p-1}` about `theta`.
#[derive(Debug, Clone)]
pub struct RotSymModel {
    pub theta: UnitVector,
    pub radial: RadialLaw,
}

impl RotSymModel {
    pub fn new(theta: UnitVector, radial: RadialLaw) -> Result<Self> {
        let m = RotSymModel { theta, radial };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.radial.validate()?;
        if let Some(p) = self.radial.implied_dim() {
            if p != self.theta.dim() {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: self.theta.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Shape parameters `(a, b)` of the beta law of `(1+u)/2` with `E[u] = e1`
/// and `Var[u] = 1/p`.
pub fn solve_beta_shapes(e1: f64, p: usize) -> Result<(f64, f64)> {
    if p < 2 || !e1.is_finite() || e1.abs() >= 1.0 {
        return Err(Error::InfeasibleMoments { e1, p });
    }
    let m = 0.5 * (1.0 + e1);
    let v = 0.25 / p as f64;
    let spread = m * (1.0 - m);
    if v >= spread {
        return Err(Error::InfeasibleMoments { e1, p });
    }
    let k = spread / v - 1.0;
    Ok((m * k, (1.0 - m) * k))
}

/// Tabulated CDF of the angle `φ = arccos u`.
struct AngleTable {
    lo: f64,
    width: f64,
    /// `cum[k]` is the (shifted) mass of `[lo, lo + k·width]`.
    cum: Vec<f64>,
    /// Shifted density at the grid nodes.
    dens: Vec<f64>,
    shift: f64,
    log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl AngleTable {
    fn new(log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        let pi = std::f64::consts::PI;
        let n = TABLE_INTERVALS;
        let scan: Vec<f64> = (0..=n).map(|i| log_density(pi * i as f64 / n as f64)).collect();
        if scan.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::QuadratureFailure(
                "angle density is not finite on the grid".into(),
            ));
        }
        let peak = scan.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return Err(Error::QuadratureFailure("angle density vanishes".into()));
        }
        let first = scan.iter().position(|v| *v > peak - LOG_MASS_CUTOFF).unwrap_or(0);
        let last = scan.iter().rposition(|v| *v > peak - LOG_MASS_CUTOFF).unwrap_or(n);
        let lo = pi * first.saturating_sub(1) as f64 / n as f64;
        let hi = pi * (last + 1).min(n) as f64 / n as f64;
        let width = (hi - lo) / n as f64;
        let rule = gl8();
        let mut cum = Vec::with_capacity(n + 1);
        let mut dens = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..=n {
            let a = lo + width * k as f64;
            dens.push((log_density(a) - peak).exp());
            if k < n {
                acc += rule.integrate(|x| (log_density(x) - peak).exp(), a, a + width);
                cum.push(acc);
            }
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::QuadratureFailure(format!(
                "angle-space mass is {acc}"
            )));
        }
        Ok(AngleTable {
            lo,
            width,
            cum,
            dens,
            shift: peak,
            log_density,
        })
    }

    fn total(&self) -> f64 {
        self.cum[TABLE_INTERVALS]
    }

    fn density(&self, phi: f64) -> f64 {
        ((self.log_density)(phi) - self.shift).exp()
    }

    /// Angle `φ` with `P[Φ ≤ φ] = g`.
    fn quantile(&self, g: f64) -> f64 {
        let total = self.total();
        let y = g.clamp(0.0, 1.0) * total;
        let k = (self.cum.partition_point(|c| *c <= y)).clamp(1, TABLE_INTERVALS) - 1;
        let a = self.lo + self.width * k as f64;
        let r = y - self.cum[k];
        let (h0, h1) = (self.dens[k], self.dens[k + 1]);
        // start from the root of the integral of the linear interpolant
        let slope = (h1 - h0) / self.width;
        let disc = (h0 * h0 + 2.0 * slope * r).max(0.0);
        let denom = h0 + disc.sqrt();
        let mut s = if denom > 0.0 { 2.0 * r / denom } else { 0.5 * self.width };
        let (mut lo, mut hi) = (0.0, self.width);
        s = s.clamp(lo, hi);
        let rule = gl8();
        let tol = INVERSE_TOL * total;
        for _ in 0..100 {
            let resid = rule.integrate(|x| self.density(x), a, a + s) - r;
            if resid.abs() <= tol {
                break;
            }
            if resid > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            if hi - lo <= f64::EPSILON * (a + hi).abs() {
                break;
            }
            let d = self.density(a + s);
            let step = if d > 0.0 { s - resid / d } else { f64::NAN };
            s = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
        }
        a + s
    }
}

/// Prepared `u`-sampler for one radial law and dimension.
enum AxialSampler {
    Uniform,
    Table(AngleTable),
    Beta { a: f64, b: f64, dist: rand_distr::Beta<f64> },
}

impl AxialSampler {
    fn new(radial: &RadialLaw, p: usize) -> Result<Self> {
        radial.validate()?;
        if p < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
        }
        if let Some(q) = radial.implied_dim() {
            if q != p {
                return Err(Error::DimensionMismatch { expected: q, found: p });
            }
        }
        match radial {
            RadialLaw::BetaMatched { e1, p } => {
                let (a, b) = solve_beta_shapes(*e1, *p)?;
                let dist = rand_distr::Beta::new(a, b)
                    .map_err(|e| Error::InvalidParameter(format!("beta({a}, {b}): {e}")))?;
                Ok(AxialSampler::Beta { a, b, dist })
            }
            _ => Ok(AxialSampler::Table(AngleTable::new(
                radial.log_angle_density(p).expect("non-beta law"),
            )?)),
        }
    }

    /// `(u, v)` with `u = cos φ` and `v = sin φ` at probability level `q` of `u`.
    fn quantile(&self, q: f64) -> (f64, f64) {
        match self {
            AxialSampler::Uniform => unreachable!("uniform law is sampled directly"),
            AxialSampler::Table(t) => {
                let phi = t.quantile(1.0 - q);
                (phi.cos(), phi.sin())
            }
            AxialSampler::Beta { a, b, .. } => beta_uv(sbeta::inv_beta_reg(*a, *b, q)),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            AxialSampler::Beta { dist, .. } => beta_uv(dist.sample(rng)),
            _ => {
                let q: f64 = rng.random();
                self.quantile(q)
            }
        }
    }
}

fn beta_uv(x: f64) -> (f64, f64) {
    (2.0 * x - 1.0, 2.0 * (x * (1.0 - x)).max(0.0).sqrt())
}

/// Quantile of `u = X'θ` at level `q ∈ (0, 1)`.
pub fn inverse_cdf_u(radial: &RadialLaw, p: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("probability level must lie in (0, 1), got {q}")));
    }
    let radial = match radial {
        RadialLaw::Uniform => RadialLaw::Fvml { kappa: 0.0 },
        other => other.clone(),
    };
    Ok(AxialSampler::new(&radial, p)?.quantile(q).0)
}

/// A rotationally symmetric sampler with its `u`-table built once.
pub struct RotSymSampler {
    theta: UnitVector,
    axial: AxialSampler,
}

impl fmt::Debug for RotSymSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotSymSampler").field("p", &self.theta.dim()).finish()
    }
}

impl RotSymSampler {
    pub fn new(model: &RotSymModel) -> Result<Self> {
        model.validate()?;
        let axial = match model.radial {
            RadialLaw::Uniform => AxialSampler::Uniform,
            RadialLaw::Fvml { kappa } if kappa == 0.0 => AxialSampler::Uniform,
            _ => AxialSampler::new(&model.radial, model.dim())?,
        };
        Ok(RotSymSampler {
            theta: model.theta.clone(),
            axial,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SphericalSample> {
        check_n(n)?;
        let p = self.dim();
        let theta = self.theta.as_slice();
        let mut data = vec![0.0; n * p];
        for row in data.chunks_exact_mut(p) {
            if let AxialSampler::Uniform = self.axial {
                fill_uniform_row(row, rng);
                continue;
            }
            let (u, v) = self.axial.draw(rng);
            // equator direction: Gaussian projected off θ, then normalized
            loop {
                row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                let c = dot(row, theta);
                row.iter_mut().zip(theta).for_each(|(x, t)| *x -= c * t);
                let r = norm(row);
                if r > 0.0 {
                    row.iter_mut()
                        .zip(theta)
                        .for_each(|(x, t)| *x = u * t + v * (*x / r));
                    break;
                }
            }
        }
        Ok(SphericalSample::from_raw(n, p, data))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("sample size must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn fill_uniform_row<R: Rng + ?Sized>(row: &mut [f64], rng: &mut R) {
    loop {
        row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let r = norm(row);
        if r > 0.0 {
            row.iter_mut().for_each(|x| *x /= r);
            return;
        }
    }
}

/// `n` i.i.d. uniform points on `S^{p-1}` by normalizing Gaussian vectors.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<SphericalSample> {
    check_n(n)?;
    if p < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
    }
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        fill_uniform_row(row, rng);
    }
    Ok(SphericalSample::from_raw(n, p, data))
}

/// `n` i.i.d. draws from a rotationally symmetric model.
pub fn sample_rot_sym<R: Rng + ?Sized>(
    model: &RotSymModel,
    n: usize,
    rng: &mut R,
) -> Result<SphericalSample> {
    RotSymSampler::new(model)?.sample(n, rng)
}

/// Alternatives in `R^p` whose spatial signs feed the sphericity tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EuclideanModel {
    /// Skew-normal with scatter `I_p` and skewness vector `(ℓ, …, ℓ)'`.
    SkewNormal { ell: f64, p: usize },
    /// Gaussian with covariance `I_p + ℓ e_1 e_1'`.
    Spiked { ell: f64, p: usize },
}

impl EuclideanModel {
    pub fn dim(&self) -> usize {
        match self {
            EuclideanModel::SkewNormal { p, .. } | EuclideanModel::Spiked { p, .. } => *p,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        match *self {
            EuclideanModel::SkewNormal { ell, p } => sample_skew_normal(ell, p, n, rng),
            EuclideanModel::Spiked { ell, p } => sample_spiked_gaussian(ell, p, n, rng),
        }
    }
}

fn check_euclidean(ell: f64, p: usize, n: usize) -> Result<()> {
    check_n(n)?;
    if p < 1 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ell must be finite and >= 0, got {ell}"
        )));
    }
    Ok(())
}

/// Skew-normal draws with density `2φ_p(x)Φ(ℓ·1'x)`, by selection: keep `Z`
/// when `W ≤ α'Z`, otherwise return `-Z`.
pub fn sample_skew_normal<R: Rng + ?Sized>(
    ell: f64,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    check_euclidean(ell, p, n)?;
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let w: f64 = rng.sample(StandardNormal);
        let proj = ell * row.iter().sum::<f64>();
        if w > proj {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    DataMatrix::new(n, p, data)
}

/// Gaussian draws with covariance `I_p + ℓ e_1 e_1'`.
pub fn sample_spiked_gaussian<R: Rng + ?Sized>(
    ell: f64,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    check_euclidean(ell, p, n)?;
    let scale = (1.0 + ell).sqrt();
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        row[0] *= scale;
    }
    DataMatrix::new(n, p, data)
}
