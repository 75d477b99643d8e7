//! Test statistics, decision rules and FvML likelihood ratios.
//!
//! Every test rejects for large values of its statistic; p-values come from
//! the asymptotic null law.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chisq_quantile, chisq_sf, log_h, std_normal_quantile, std_normal_sf};
use crate::sphere::{dot, DataMatrix, SphericalSample, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    /// `√(np) X̄'θ` against `z_α`.
    SpecifiedTheta,
    /// `R^St` against `z_α`.
    RayleighHighdim,
    /// `R` against the `χ²_p` quantile.
    RayleighFixedp,
    /// `R^St` of the spatial signs of Euclidean data.
    RayleighSigns,
    /// John's sphericity test in the high-dimensional standardization.
    John,
    /// U-statistic of squared inner products of spatial signs.
    SignSphericity,
}

impl TestId {
    pub const ALL: [TestId; 6] = [
        TestId::SpecifiedTheta,
        TestId::RayleighHighdim,
        TestId::RayleighFixedp,
        TestId::RayleighSigns,
        TestId::John,
        TestId::SignSphericity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TestId::SpecifiedTheta => "specified_theta",
            TestId::RayleighHighdim => "rayleigh_highdim",
            TestId::RayleighFixedp => "rayleigh_fixedp",
            TestId::RayleighSigns => "rayleigh_signs",
            TestId::John => "john",
            TestId::SignSphericity => "sign_sphericity",
        }
    }

    /// True for tests that act on Euclidean data rather than on the sphere.
    pub fn needs_euclidean(&self) -> bool {
        matches!(self, TestId::RayleighSigns | TestId::John | TestId::SignSphericity)
    }
}

impl std::fmt::Display for TestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestId::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test id '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: TestId,
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn normal_outcome(test_id: TestId, statistic: f64, alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let critical = std_normal_quantile(1.0 - alpha)?;
    Ok(TestOutcome {
        test_id,
        statistic,
        critical,
        p_value: std_normal_sf(statistic),
        reject: statistic > critical,
        alpha,
    })
}

/// `R = n p ‖X̄‖²`.
pub fn rayleigh_statistic(sample: &SphericalSample) -> f64 {
    let xbar = sample.mean();
    (sample.n() * sample.p()) as f64 * dot(&xbar, &xbar)
}

/// `R^St = (R - p)/√(2p)`.
pub fn rayleigh_standardized(sample: &SphericalSample) -> f64 {
    let p = sample.p() as f64;
    (rayleigh_statistic(sample) - p) / (2.0 * p).sqrt()
}

/// `R^St` as the U-statistic `(√(2p)/n) Σ_{i<j} X_i'X_j`.
pub fn rayleigh_standardized_pairwise(sample: &SphericalSample) -> f64 {
    let n = sample.n();
    let mut acc = 0.0;
    for i in 0..n {
        let xi = sample.row(i);
        for j in (i + 1)..n {
            acc += dot(xi, sample.row(j));
        }
    }
    (2.0 * sample.p() as f64).sqrt() / n as f64 * acc
}

/// High-dimensional Rayleigh test: reject when `R^St > z_α`.
pub fn rayleigh_test_highdim(sample: &SphericalSample, alpha: f64) -> Result<TestOutcome> {
    normal_outcome(TestId::RayleighHighdim, rayleigh_standardized(sample), alpha)
}

/// Fixed-dimension Rayleigh test: reject when `R` exceeds the `χ²_p` quantile.
pub fn rayleigh_test_fixedp(sample: &SphericalSample, alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let p = sample.p();
    let r = rayleigh_statistic(sample);
    let critical = chisq_quantile(p, 1.0 - alpha)?;
    Ok(TestOutcome {
        test_id: TestId::RayleighFixedp,
        statistic: r,
        critical,
        p_value: chisq_sf(p, r)?,
        reject: r > critical,
        alpha,
    })
}

/// `Δ_θ = √(np) X̄'θ`.
pub fn specified_theta_statistic(sample: &SphericalSample, theta: &UnitVector) -> Result<f64> {
    sample.check_dim(theta.dim())?;
    let xbar = sample.mean();
    Ok(((sample.n() * sample.p()) as f64).sqrt() * dot(&xbar, theta.as_slice()))
}

/// Test of uniformity against alternatives concentrated about a known `θ`.
pub fn specified_theta_test(
    sample: &SphericalSample,
    theta: &UnitVector,
    alpha: f64,
) -> Result<TestOutcome> {
    let stat = specified_theta_statistic(sample, theta)?;
    normal_outcome(TestId::SpecifiedTheta, stat, alpha)
}

fn check_concentration(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// FvML log-likelihood ratio against uniformity for known `θ`:
/// `-n log H_{p/2-1}(κ) + κ n X̄'θ`.
pub fn fvml_loglik_specified(sample: &SphericalSample, theta: &UnitVector, kappa: f64) -> Result<f64> {
    check_concentration("kappa", kappa)?;
    sample.check_dim(theta.dim())?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let n = sample.n() as f64;
    let nu = 0.5 * sample.p() as f64 - 1.0;
    let xbar = sample.mean();
    Ok(-n * log_h(nu, kappa)? + kappa * n * dot(&xbar, theta.as_slice()))
}

/// Rotation-invariant FvML log-likelihood ratio (`θ` integrated out under
/// the Haar measure): `-n log H(κ) + log H(κ n ‖X̄‖)`.
pub fn fvml_loglik_invariant(sample: &SphericalSample, kappa: f64) -> Result<f64> {
    check_concentration("kappa", kappa)?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let n = sample.n() as f64;
    let nu = 0.5 * sample.p() as f64 - 1.0;
    let xbar = sample.mean();
    let r = dot(&xbar, &xbar).sqrt();
    Ok(-n * log_h(nu, kappa)? + log_h(nu, kappa * n * r)?)
}

/// `Λ - (τΔ_θ - τ²/2)` at `κ = τ√(p/n)`.
pub fn lan_residual_specified(sample: &SphericalSample, theta: &UnitVector, tau: f64) -> Result<f64> {
    check_concentration("tau", tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let (n, p) = (sample.n() as f64, sample.p() as f64);
    let kappa = tau * (p / n).sqrt();
    let lambda = fvml_loglik_specified(sample, theta, kappa)?;
    let delta = specified_theta_statistic(sample, theta)?;
    Ok(lambda - (tau * delta - 0.5 * tau * tau))
}

/// `Λ - (τ² R^St/√2 - τ⁴/4)` at `κ = τ p^{3/4}/√n`.
pub fn lan_residual_invariant(sample: &SphericalSample, tau: f64) -> Result<f64> {
    check_concentration("tau", tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let (n, p) = (sample.n() as f64, sample.p() as f64);
    let kappa = tau * p.powf(0.75) / n.sqrt();
    let lambda = fvml_loglik_invariant(sample, kappa)?;
    let tau2 = tau * tau;
    Ok(lambda - (tau2 * rayleigh_standardized(sample) / std::f64::consts::SQRT_2 - 0.25 * tau2 * tau2))
}

fn to_matrix(data: &DataMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(data.n(), data.p(), data.as_row_major())
}

/// `tr(A²)` and `tr(A)` for `A = X'X`, via whichever Gram matrix is smaller.
fn gram_traces(x: &DMatrix<f64>) -> (f64, f64) {
    let g = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    };
    (g.iter().map(|v| v * v).sum(), g.trace())
}

/// John's statistic `U = p tr(S²)/(tr S)² - 1`, with `S` the uncentered
/// second-moment matrix.
pub fn john_u(data: &DataMatrix) -> Result<f64> {
    let (tr2, tr) = gram_traces(&to_matrix(data));
    if !(tr > 0.0) {
        return Err(Error::DegenerateData("tr S = 0".into()));
    }
    Ok(data.p() as f64 * tr2 / (tr * tr) - 1.0)
}

/// John's test, standardized as `(nU - p - 1)/2` against `z_α`.
pub fn john_sphericity_test(data: &DataMatrix, alpha: f64) -> Result<TestOutcome> {
    check_min_shape(data)?;
    let (n, p) = (data.n() as f64, data.p() as f64);
    let w = 0.5 * (n * john_u(data)? - p - 1.0);
    normal_outcome(TestId::John, w, alpha)
}

fn check_min_shape(data: &DataMatrix) -> Result<()> {
    if data.n() < 2 || data.p() < 2 {
        return Err(Error::Domain(format!(
            "need n >= 2 and p >= 2, got n={}, p={}",
            data.n(),
            data.p()
        )));
    }
    Ok(())
}

/// `Σ_{i<j} (p(U_i'U_j)² - 1) / √(n(n-1)(p-1)/(p+2))` for spatial signs `U_i`.
pub fn sign_sphericity_statistic(signs: &SphericalSample) -> f64 {
    let (n, p) = (signs.n() as f64, signs.p() as f64);
    let u = DMatrix::from_row_slice(signs.n(), signs.p(), signs.as_row_major());
    let (tr2, _) = gram_traces(&u);
    // Σ_{i,j} (U_i'U_j)² includes n unit diagonal terms
    let pairs = 0.5 * (tr2 - n);
    let num = p * pairs - 0.5 * n * (n - 1.0);
    num / (n * (n - 1.0) * (p - 1.0) / (p + 2.0)).sqrt()
}

/// Sign test of sphericity about the origin.
pub fn sign_sphericity_test(data: &DataMatrix, alpha: f64) -> Result<TestOutcome> {
    check_min_shape(data)?;
    let signs = spatial_signs(data)?;
    normal_outcome(TestId::SignSphericity, sign_sphericity_statistic(&signs), alpha)
}

/// High-dimensional Rayleigh test applied to the spatial signs.
pub fn rayleigh_signs_test(data: &DataMatrix, alpha: f64) -> Result<TestOutcome> {
    check_min_shape(data)?;
    let signs = spatial_signs(data)?;
    normal_outcome(TestId::RayleighSigns, rayleigh_standardized(&signs), alpha)
}

fn spatial_signs(data: &DataMatrix) -> Result<SphericalSample> {
    data.spatial_signs().map_err(|e| match e {
        Error::ZeroRow { .. } => Error::ZeroVector,
        other => other,
    })
}

/// The three sphericity tests on one data set, in the order
/// Rayleigh-on-signs, John, sign.
pub fn sphericity_suite(data: &DataMatrix, alpha: f64) -> Result<[TestOutcome; 3]> {
    Ok([
        rayleigh_signs_test(data, alpha)?,
        john_sphericity_test(data, alpha)?,
        sign_sphericity_test(data, alpha)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_uniform_sphere;
    use crate::special::std_normal_cdf;
    use crate::sphere::{apply_rotation, random_rotation};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn antipodal(p: usize) -> SphericalSample {
        let mut a = vec![0.0; p];
        a[0] = 1.0;
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        SphericalSample::from_rows(&[a, b]).unwrap()
    }

    #[test]
    fn rayleigh_trivial_values() {
        let theta = UnitVector::basis(5, 2).unwrap();
        let one = SphericalSample::from_unit_vectors(std::slice::from_ref(&theta)).unwrap();
        assert!((rayleigh_statistic(&one) - 5.0).abs() < 1e-12);
        assert!(rayleigh_standardized(&one).abs() < 1e-12);
        assert_eq!(rayleigh_statistic(&antipodal(5)), 0.0);
        let twice = SphericalSample::from_unit_vectors(&[theta.clone(), theta]).unwrap();
        assert!((rayleigh_statistic(&twice) - 10.0).abs() < 1e-12);
        assert!((rayleigh_standardized(&antipodal(8)) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn highdim_decisions() {
        let out = normal_outcome(TestId::RayleighHighdim, 1.7, 0.05).unwrap();
        assert!(out.reject && (out.critical - 1.6448536269514722).abs() < 1e-12);
        let out = normal_outcome(TestId::RayleighHighdim, 0.0, 0.3).unwrap();
        assert!(!out.reject && (out.p_value - 0.5).abs() < 1e-15);
        let out = rayleigh_test_highdim(&antipodal(8), 0.05).unwrap();
        assert!(!out.reject && out.p_value > 0.97);
        assert!((out.p_value - std_normal_cdf(2.0)).abs() < 1e-12);
        assert!(rayleigh_test_highdim(&antipodal(8), 1.0).is_err());
    }

    #[test]
    fn fixedp_decisions() {
        let two = SphericalSample::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let out = rayleigh_test_fixedp(&two, 0.05).unwrap();
        assert!((out.critical + 2.0 * 0.05f64.ln()).abs() < 1e-10);
        assert_eq!(out.statistic, 0.0);
        assert!((out.p_value - 1.0).abs() < 1e-15);
        assert!(!out.reject);
    }

    #[test]
    fn fixedp_null_size() {
        let mut r = rng(31);
        let m = 2000;
        let rejections = (0..m)
            .filter(|_| {
                let s = sample_uniform_sphere(200, 3, &mut r).unwrap();
                rayleigh_test_fixedp(&s, 0.05).unwrap().reject
            })
            .count();
        let f = rejections as f64 / m as f64;
        assert!((f - 0.05).abs() <= 0.015, "{f}");
    }

    #[test]
    fn specified_theta_extremes() {
        let (n, p) = (4usize, 3usize);
        let theta = UnitVector::basis(p, 1).unwrap();
        let same = SphericalSample::from_unit_vectors(&vec![theta.clone(); n]).unwrap();
        let out = specified_theta_test(&same, &theta, 0.05).unwrap();
        assert!((out.statistic - ((n * p) as f64).sqrt()).abs() < 1e-12 && out.reject);
        let neg = UnitVector::new(theta.as_slice().iter().map(|x| -x).collect()).unwrap();
        let opp = SphericalSample::from_unit_vectors(&vec![neg; n]).unwrap();
        let out = specified_theta_test(&opp, &theta, 0.05).unwrap();
        assert!((out.statistic + ((n * p) as f64).sqrt()).abs() < 1e-12 && !out.reject);
        let wrong = UnitVector::basis(4, 0).unwrap();
        assert!(matches!(
            specified_theta_test(&same, &wrong, 0.05),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loglik_examples() {
        let theta = UnitVector::basis(3, 0).unwrap();
        let one = SphericalSample::from_unit_vectors(std::slice::from_ref(&theta)).unwrap();
        assert_eq!(fvml_loglik_specified(&one, &theta, 0.0).unwrap(), 0.0);
        assert_eq!(fvml_loglik_invariant(&one, 0.0).unwrap(), 0.0);
        let v = fvml_loglik_specified(&one, &theta, 1.0).unwrap();
        assert!((v - (1.0 - 1f64.sinh().ln())).abs() < 1e-14);
        assert!(fvml_loglik_specified(&one, &theta, -1.0).is_err());
    }

    #[test]
    fn lan_residual_zero_tau() {
        let s = sample_uniform_sphere(10, 4, &mut rng(32)).unwrap();
        let theta = UnitVector::basis(4, 0).unwrap();
        assert_eq!(lan_residual_specified(&s, &theta, 0.0).unwrap(), 0.0);
        assert_eq!(lan_residual_invariant(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn lan_specified_residual_is_deterministic() {
        // κnX̄'θ = τΔ_θ exactly, so only -n log H(κ) + τ²/2 remains
        let theta = UnitVector::basis(50, 0).unwrap();
        let tau = 1.0;
        let a = lan_residual_specified(&sample_uniform_sphere(50, 50, &mut rng(1)).unwrap(), &theta, tau).unwrap();
        let b = lan_residual_specified(&sample_uniform_sphere(50, 50, &mut rng(2)).unwrap(), &theta, tau).unwrap();
        let kappa: f64 = tau;
        let exact = 0.5 * tau * tau - 50.0 * log_h(24.0, kappa).unwrap();
        assert!((a - exact).abs() < 1e-12 && (b - exact).abs() < 1e-12);
    }

    #[test]
    fn john_at_exact_sphericity() {
        // ±e_k rows give S ∝ I
        let p = 4;
        let mut rows = Vec::new();
        for k in 0..p {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; p];
                r[k] = s;
                rows.push(r);
            }
        }
        let data = DataMatrix::from_rows(&rows).unwrap();
        assert!(john_u(&data).unwrap().abs() < 1e-14);
        let out = john_sphericity_test(&data, 0.05).unwrap();
        assert!((out.statistic + (p as f64 + 1.0) / 2.0).abs() < 1e-12 && !out.reject);
        let zero = DataMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(john_u(&zero), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn sign_statistic_matches_pairwise_sum() {
        let s = sample_uniform_sphere(30, 7, &mut rng(33)).unwrap();
        let (n, p) = (30.0, 7.0);
        let mut acc = 0.0;
        for i in 0..30 {
            for j in (i + 1)..30 {
                acc += p * dot(s.row(i), s.row(j)).powi(2) - 1.0;
            }
        }
        let expect = acc / (n * (n - 1.0) * (p - 1.0) / (p + 2.0)).sqrt();
        assert!((sign_sphericity_statistic(&s) - expect).abs() < 1e-10);
    }

    #[test]
    fn sign_null_moments() {
        let mut r = rng(34);
        let p = 5;
        let a = sample_uniform_sphere(100_000, p, &mut r).unwrap();
        let b = sample_uniform_sphere(100_000, p, &mut r).unwrap();
        let c: Vec<f64> = a.rows().zip(b.rows()).map(|(x, y)| dot(x, y)).collect();
        let stats = |k: i32| {
            let v: Vec<f64> = c.iter().map(|x| x.powi(k)).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            (m, sd / (v.len() as f64).sqrt())
        };
        let (m2, se2) = stats(2);
        let (m4, se4) = stats(4);
        assert!((m2 - 0.2).abs() < 3.0 * se2);
        assert!((m4 - 3.0 / 35.0).abs() < 3.0 * se4);
    }

    #[test]
    fn sign_rejects_zero_row() {
        let data = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 1.0]]).unwrap();
        assert!(matches!(sign_sphericity_test(&data, 0.05), Err(Error::ZeroVector)));
    }

    #[test]
    fn test_id_round_trip() {
        for t in TestId::ALL {
            assert_eq!(t.as_str().parse::<TestId>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.as_str()));
        }
        assert!("nope".parse::<TestId>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pairwise_identity(seed in any::<u64>(), n in 1usize..200, p in 2usize..40) {
            let s = sample_uniform_sphere(n, p, &mut rng(seed)).unwrap();
            let a = rayleigh_standardized(&s);
            let b = rayleigh_standardized_pairwise(&s);
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }

        #[test]
        fn rotation_invariance(seed in any::<u64>(), n in 2usize..60, p in 2usize..20) {
            let mut r = rng(seed);
            let s = sample_uniform_sphere(n, p, &mut r).unwrap();
            let q = random_rotation(p, &mut r).unwrap();
            let t = apply_rotation(&s, &q).unwrap();
            prop_assert!((rayleigh_statistic(&s) - rayleigh_statistic(&t)).abs() < 1e-10);
            prop_assert!((rayleigh_standardized(&s) - rayleigh_standardized(&t)).abs() < 1e-10);
            let a = fvml_loglik_invariant(&s, 1.3).unwrap();
            let b = fvml_loglik_invariant(&t, 1.3).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!((sign_sphericity_statistic(&s) - sign_sphericity_statistic(&t)).abs() < 1e-10);
        }

        #[test]
        fn sup_theta_identity(seed in any::<u64>(), n in 1usize..50, p in 2usize..20) {
            let mut r = rng(seed);
            let s = sample_uniform_sphere(n, p, &mut r).unwrap();
            let bound = rayleigh_statistic(&s).sqrt();
            let dirs = sample_uniform_sphere(200, p, &mut r).unwrap();
            for d in dirs.rows() {
                let theta = UnitVector::new(d.to_vec()).unwrap();
                prop_assert!(specified_theta_statistic(&s, &theta).unwrap() <= bound + 1e-9);
            }
            let xbar = s.mean();
            if let Ok(hat) = crate::sphere::normalize_to_sphere(&xbar) {
                let at = specified_theta_statistic(&s, &hat).unwrap();
                prop_assert!((at - bound).abs() < 1e-12 * bound.max(1.0));
            }
        }
    }
}
