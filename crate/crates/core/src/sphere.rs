//! Unit vectors, samples on the unit sphere and rotations.
//!
//! Samples are stored row-major as dense `f64` buffers. Every row of a
//! [`SphericalSample`] has unit Euclidean norm; constructors re-normalize rows
//! that are within `1e-8` of unit norm and reject anything further away.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Rows whose norm differs from 1 by more than this are rejected.
const RENORMALIZE_TOL: f64 = 1e-8;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled to avoid overflow and underflow.
pub(crate) fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ss.sqrt()
}

fn check_unit(row: &mut [f64]) -> Result<()> {
    let r = norm(row);
    if !r.is_finite() || (r - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::NotUnit { norm: r });
    }
    if r != 1.0 {
        row.iter_mut().for_each(|v| *v /= r);
    }
    Ok(())
}

/// A point of the unit sphere `S^{p-1}`, `p >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain(format!(
                "unit vectors need dimension >= 2, got {}",
                coords.len()
            )));
        }
        check_unit(&mut coords)?;
        Ok(UnitVector(coords))
    }

    /// The `k`-th canonical basis vector of `R^p` (zero-based).
    pub fn basis(p: usize, k: usize) -> Result<Self> {
        if k >= p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: k + 1,
            });
        }
        let mut c = vec![0.0; p];
        c[k] = 1.0;
        UnitVector::new(c)
    }

    pub(crate) fn from_normalized(coords: Vec<f64>) -> Self {
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(dot(&self.0, &other.0))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `n` observations on `S^{p-1}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSample {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SphericalSample {
    /// Builds a sample from a row-major buffer of `n * p` values.
    pub fn from_row_major(n: usize, p: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("a sample needs at least one row".into()));
        }
        if p < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        for row in data.chunks_exact_mut(p) {
            check_unit(row)?;
        }
        Ok(SphericalSample { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        SphericalSample::from_row_major(rows.len(), p, data)
    }

    pub fn from_unit_vectors(rows: &[UnitVector]) -> Result<Self> {
        let p = rows.first().map_or(0, UnitVector::dim);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.dim(),
                });
            }
            data.extend_from_slice(r.as_slice());
        }
        SphericalSample::from_row_major(rows.len(), p, data)
    }

    /// Caller guarantees unit rows.
    pub(crate) fn from_raw(n: usize, p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * p);
        SphericalSample { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// Sample mean `X̄` of the rows.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for row in self.rows() {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        if self.p != p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: p,
            });
        }
        Ok(())
    }
}

/// An `n x p` matrix of Euclidean observations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if n == 0 || p == 0 {
            return Err(Error::Domain("empty data matrix".into()));
        }
        Ok(DataMatrix { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        DataMatrix::new(rows.len(), p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// Projects every row onto the unit sphere (spatial signs).
    pub fn spatial_signs(&self) -> Result<SphericalSample> {
        if self.p < 2 {
            return Err(Error::Domain(format!(
                "dimension must be >= 2, got {}",
                self.p
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let r = norm(row);
            if r == 0.0 {
                return Err(Error::ZeroRow { row: i });
            }
            data.extend(row.iter().map(|v| v / r));
        }
        Ok(SphericalSample::from_raw(self.n, self.p, data))
    }

    /// Rotates every row: row `i` of the result is `Q x_i`.
    pub fn rotate(&self, q: &Rotation) -> Result<DataMatrix> {
        if q.dim() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: q.dim(),
            });
        }
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            data.extend(q.apply_raw(row));
        }
        Ok(DataMatrix {
            n: self.n,
            p: self.p,
            data,
        })
    }
}

/// `x = u θ + v s` with `u = x'θ`, `v = sqrt(1 - u²)` and `s ⟂ θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentNormal {
    pub u: f64,
    pub v: f64,
    /// Unit vector orthogonal to `θ`, or the zero vector when `v = 0`.
    pub s: Vec<f64>,
}

/// Projects a nonzero vector onto the unit sphere.
pub fn normalize_to_sphere(x: &[f64]) -> Result<UnitVector> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !r.is_finite() {
        return Err(Error::Domain("non-finite coordinates".into()));
    }
    if x.len() < 2 {
        return Err(Error::Domain(format!(
            "unit vectors need dimension >= 2, got {}",
            x.len()
        )));
    }
    Ok(UnitVector::from_normalized(x.iter().map(|v| v / r).collect()))
}

pub fn tangent_normal_decompose(x: &UnitVector, theta: &UnitVector) -> Result<TangentNormal> {
    let u = x.dot(theta)?.clamp(-1.0, 1.0);
    let t = theta.as_slice();
    let mut r: Vec<f64> = x.as_slice().iter().zip(t).map(|(a, b)| a - u * b).collect();
    // second Gram-Schmidt pass keeps s ⟂ θ when v is tiny
    let c = dot(&r, t);
    r.iter_mut().zip(t).for_each(|(a, b)| *a -= c * b);
    let v = norm(&r);
    if v == 0.0 {
        return Ok(TangentNormal {
            u,
            v: 0.0,
            s: vec![0.0; x.dim()],
        });
    }
    r.iter_mut().for_each(|a| *a /= v);
    Ok(TangentNormal { u, v, s: r })
}

/// A `p x p` rotation matrix (orthogonal, determinant +1), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    p: usize,
    m: Vec<f64>,
}

impl Rotation {
    pub fn identity(p: usize) -> Self {
        let mut m = vec![0.0; p * p];
        (0..p).for_each(|i| m[i * p + i] = 1.0);
        Rotation { p, m }
    }

    /// Accepts a row-major matrix if it is orthogonal with determinant +1
    /// (tolerance `1e-10`).
    pub fn from_row_major(p: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: m.len(),
            });
        }
        let q = DMatrix::from_row_slice(p, p, &m);
        let err = (q.transpose() * &q - DMatrix::identity(p, p)).amax();
        if err > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "matrix is not orthogonal (max |Q'Q - I| = {err:e})"
            )));
        }
        if q.determinant() < 0.0 {
            return Err(Error::InvalidParameter("determinant is -1".into()));
        }
        Ok(Rotation { p, m })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        DMatrix::from_row_slice(self.p, self.p, &self.m).determinant()
    }

    /// Largest entry of `|Q'Q - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let q = DMatrix::from_row_slice(self.p, self.p, &self.m);
        (q.transpose() * &q - DMatrix::identity(self.p, self.p)).amax()
    }

    fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        self.m.chunks_exact(self.p).map(|row| dot(row, x)).collect()
    }

    pub fn apply(&self, x: &UnitVector) -> Result<UnitVector> {
        if x.dim() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.dim(),
            });
        }
        normalize_to_sphere(&self.apply_raw(x.as_slice()))
    }
}

/// Haar-distributed rotation of `R^p`: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal absorbed into `Q`, then one column flipped if
/// needed so that `det Q = +1`.
pub fn random_rotation<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<Rotation> {
    if p < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {p}")));
    }
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut m = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            m.push(q[(i, j)]);
        }
    }
    Ok(Rotation { p, m })
}

/// Row `i` of the result is `Q x_i`.
pub fn apply_rotation(sample: &SphericalSample, q: &Rotation) -> Result<SphericalSample> {
    sample.check_dim(q.dim())?;
    let mut data = Vec::with_capacity(sample.data.len());
    for row in sample.rows() {
        let y = q.apply_raw(row);
        let r = norm(&y);
        data.extend(y.into_iter().map(|v| v / r));
    }
    Ok(SphericalSample::from_raw(sample.n, sample.p, data))
}
