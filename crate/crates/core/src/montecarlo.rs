//! Reproducible Monte Carlo experiments over grids of `(n, p, alternative)`.
//!
//! Every replicate draws from its own ChaCha stream, addressed by the master
//! seed, a hash of the cell and the replicate index. Rejections are summed as
//! integers, so results do not depend on scheduling or thread count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{EuclideanModel, RadialLaw, RotSymModel, RotSymSampler};
use crate::error::{Error, Result};
use crate::power::{power_fixedp_rayleigh, power_highdim_rayleigh, power_specified};
use crate::sphere::{DataMatrix, SphericalSample, UnitVector};
use crate::testing::{
    john_sphericity_test, rayleigh_signs_test, rayleigh_test_fixedp, rayleigh_test_highdim,
    sign_sphericity_test, specified_theta_test, TestId,
};

pub const DEFAULT_SEED: u64 = 20_130_601;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Sample sizes and dimensions of the rotationally symmetric grids.
pub const GRID_SIZES: [usize; 3] = [30, 100, 400];
pub const ELLS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];
/// Scale of the local parameter: `τ = 0.6ℓ`.
pub const TAU_PER_ELL: f64 = 0.6;

/// The alternative sampled in a cell. `j = 1` uses the specified-`θ`
/// contiguity rate and `j = 2` the invariant detection rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Alternative {
    /// FvML with `κ = 0.6ℓ√(p/n)` (`j = 1`) or `0.6ℓ p^{3/4}/√n` (`j = 2`).
    Fvml { j: u8, ell: f64 },
    /// Beta-matched `u` with variance `1/p` and mean `0.6ℓ/√(np)` (`j = 1`)
    /// or `0.6ℓ/(n^{1/2} p^{1/4})` (`j = 2`).
    Beta { j: u8, ell: f64 },
    SkewNormal { ell: f64 },
    Spiked { ell: f64 },
}

impl Alternative {
    pub fn family(&self) -> &'static str {
        match self {
            Alternative::Fvml { .. } => "fvml",
            Alternative::Beta { .. } => "beta",
            Alternative::SkewNormal { .. } => "skew_normal",
            Alternative::Spiked { .. } => "spiked",
        }
    }

    pub fn ell(&self) -> f64 {
        match *self {
            Alternative::Fvml { ell, .. }
            | Alternative::Beta { ell, .. }
            | Alternative::SkewNormal { ell }
            | Alternative::Spiked { ell } => ell,
        }
    }

    pub fn j(&self) -> Option<u8> {
        match *self {
            Alternative::Fvml { j, .. } | Alternative::Beta { j, .. } => Some(j),
            _ => None,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Alternative::SkewNormal { .. } | Alternative::Spiked { .. })
    }

    /// Concentration of the FvML cell at `(n, p)`.
    pub fn fvml_kappa(j: u8, ell: f64, n: usize, p: usize) -> f64 {
        let (nf, pf) = (n as f64, p as f64);
        let tau = TAU_PER_ELL * ell;
        if j == 1 {
            tau * (pf / nf).sqrt()
        } else {
            tau * pf.powf(0.75) / nf.sqrt()
        }
    }

    /// Mean of `u` in the beta-matched cell at `(n, p)`.
    pub fn beta_e1(j: u8, ell: f64, n: usize, p: usize) -> f64 {
        let (nf, pf) = (n as f64, p as f64);
        let tau = TAU_PER_ELL * ell;
        if j == 1 {
            tau / (nf * pf).sqrt()
        } else {
            tau / (nf.sqrt() * pf.powf(0.25))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub p: usize,
    pub alternative: Alternative,
    pub tests: Vec<TestId>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub replicates: usize,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    pub cells: Vec<Cell>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTally {
    pub test_id: TestId,
    pub rejections: usize,
    pub frequency: f64,
    pub se: f64,
    pub asymptotic_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell_id: String,
    pub cell: Cell,
    pub master_seed: u64,
    pub tallies: Vec<TestTally>,
    /// Not serialized, so repeated runs produce identical bytes.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl CellResult {
    pub fn tally(&self, test: TestId) -> Option<&TestTally> {
        self.tallies.iter().find(|t| t.test_id == test)
    }
}

/// Outcome of a grid run: surviving cells in spec order, plus failures.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub results: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub index: usize,
    pub cell_id: String,
    pub error: Error,
}

impl Cell {
    /// Canonical identifier; it addresses the RNG streams, so the tests,
    /// level and replicate count do not enter it.
    pub fn id(&self) -> String {
        let alt = match self.alternative {
            Alternative::Fvml { j, ell } | Alternative::Beta { j, ell } => {
                format!("family={};j={j};ell={ell:?}", self.alternative.family())
            }
            Alternative::SkewNormal { ell } | Alternative::Spiked { ell } => {
                format!("family={};ell={ell:?}", self.alternative.family())
            }
        };
        format!("n={};p={};{alt}", self.n, self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.p < 2 {
            return Err(Error::InvalidParameter(format!(
                "cell needs n >= 1 and p >= 2, got n={}, p={}",
                self.n, self.p
            )));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let ell = self.alternative.ell();
        if !(ell.is_finite() && ell >= 0.0) {
            return Err(Error::InvalidParameter(format!("ell must be finite and >= 0, got {ell}")));
        }
        if let Some(j) = self.alternative.j() {
            if j != 1 && j != 2 {
                return Err(Error::InvalidParameter(format!("j must be 1 or 2, got {j}")));
            }
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidParameter("cell lists no tests".into()));
        }
        for t in &self.tests {
            if t.needs_euclidean() != self.alternative.is_euclidean() {
                return Err(Error::InvalidParameter(format!(
                    "test {t} does not apply to the {} family",
                    self.alternative.family()
                )));
            }
        }
        Ok(())
    }

    /// Asymptotic rejection probability of `test` in this cell, when one
    /// is available.
    pub fn reference_power(&self, test: TestId) -> Result<Option<f64>> {
        let (j, ell) = match self.alternative {
            Alternative::Fvml { j, ell } | Alternative::Beta { j, ell } => (j, ell),
            _ => return Ok(None),
        };
        let alpha = self.alpha;
        if ell == 0.0 {
            return Ok(Some(alpha));
        }
        let tau = TAU_PER_ELL * ell;
        let v = match (test, j) {
            (TestId::SpecifiedTheta, 1) => power_specified(tau, alpha)?,
            // consistent against the faster-rate alternatives
            (TestId::SpecifiedTheta, _) => 1.0,
            // blind to contiguous alternatives
            (TestId::RayleighHighdim, 1) => alpha,
            (TestId::RayleighHighdim, _) => power_highdim_rayleigh(tau, alpha)?,
            (TestId::RayleighFixedp, 1) => power_fixedp_rayleigh(self.p, tau, alpha)?,
            (TestId::RayleighFixedp, _) => {
                // the same κ expressed on the contiguity scale: τ p^{1/4}
                power_fixedp_rayleigh(self.p, tau * (self.p as f64).powf(0.25), alpha)?
            }
            _ => return Ok(None),
        };
        Ok(Some(v))
    }
}

/// 64-bit FNV-1a.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream of replicate `r` of the cell with identifier `cell_id`.
pub fn replicate_rng(master_seed: u64, cell_id: &str, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(mix(fnv1a(cell_id) ^ mix(r)));
    rng
}

enum CellSampler {
    Sphere(RotSymSampler),
    Euclidean(EuclideanModel),
}

enum Draw {
    Sphere(SphericalSample),
    Euclidean(DataMatrix),
}

impl CellSampler {
    fn new(cell: &Cell) -> Result<(Self, UnitVector)> {
        let theta = UnitVector::basis(cell.p, 0)?;
        let (n, p) = (cell.n, cell.p);
        let sampler = match cell.alternative {
            Alternative::Fvml { j, ell } => {
                let law = RadialLaw::fvml(Alternative::fvml_kappa(j, ell, n, p))?;
                CellSampler::Sphere(RotSymSampler::new(&RotSymModel::new(theta.clone(), law)?)?)
            }
            Alternative::Beta { j, ell } => {
                let law = if ell == 0.0 {
                    RadialLaw::Uniform
                } else {
                    RadialLaw::beta_matched(Alternative::beta_e1(j, ell, n, p), p)?
                };
                CellSampler::Sphere(RotSymSampler::new(&RotSymModel::new(theta.clone(), law)?)?)
            }
            Alternative::SkewNormal { ell } => {
                CellSampler::Euclidean(EuclideanModel::SkewNormal { ell, p })
            }
            Alternative::Spiked { ell } => CellSampler::Euclidean(EuclideanModel::Spiked { ell, p }),
        };
        Ok((sampler, theta))
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Draw> {
        match self {
            CellSampler::Sphere(s) => Ok(Draw::Sphere(s.sample(n, rng)?)),
            CellSampler::Euclidean(m) => Ok(Draw::Euclidean(m.sample(n, rng)?)),
        }
    }
}

fn run_test(test: TestId, draw: &Draw, theta: &UnitVector, alpha: f64) -> Result<bool> {
    let out = match (draw, test) {
        (Draw::Sphere(s), TestId::SpecifiedTheta) => specified_theta_test(s, theta, alpha)?,
        (Draw::Sphere(s), TestId::RayleighHighdim) => rayleigh_test_highdim(s, alpha)?,
        (Draw::Sphere(s), TestId::RayleighFixedp) => rayleigh_test_fixedp(s, alpha)?,
        (Draw::Euclidean(x), TestId::RayleighSigns) => rayleigh_signs_test(x, alpha)?,
        (Draw::Euclidean(x), TestId::John) => john_sphericity_test(x, alpha)?,
        (Draw::Euclidean(x), TestId::SignSphericity) => sign_sphericity_test(x, alpha)?,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "test {test} does not apply to this sample type"
            )))
        }
    };
    Ok(out.reject)
}

/// Runs all replicates of one cell.
pub fn run_cell(cell: &Cell, master_seed: u64) -> Result<CellResult> {
    cell.validate()?;
    let start = Instant::now();
    let id = cell.id();
    let (sampler, theta) = CellSampler::new(cell)?;
    let k = cell.tests.len();
    let counts = (0..cell.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<usize>> {
            let mut rng = replicate_rng(master_seed, &id, r);
            let draw = sampler.draw(cell.n, &mut rng)?;
            cell.tests
                .iter()
                .map(|t| run_test(*t, &draw, &theta, cell.alpha).map(usize::from))
                .collect()
        })
        .try_reduce(
            || vec![0; k],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
        .map_err(|e| annotate(&id, e))?;
    let m = cell.replicates as f64;
    let tallies = cell
        .tests
        .iter()
        .zip(counts)
        .map(|(t, c)| {
            let f = c as f64 / m;
            Ok(TestTally {
                test_id: *t,
                rejections: c,
                frequency: f,
                se: (f * (1.0 - f) / m).sqrt(),
                asymptotic_power: cell.reference_power(*t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult {
        cell_id: id,
        cell: cell.clone(),
        master_seed,
        tallies,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn annotate(id: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("cell {id}: {m}")),
        Error::QuadratureFailure(m) => Error::QuadratureFailure(format!("cell {id}: {m}")),
        Error::DegenerateData(m) => Error::DegenerateData(format!("cell {id}: {m}")),
        other => other,
    }
}

/// Runs every cell; failed cells are reported and the rest returned.
pub fn run_grid(spec: &ExperimentSpec) -> GridReport {
    let outcomes: Vec<(usize, Result<CellResult>)> = spec
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| (i, run_cell(c, spec.master_seed)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (index, o) in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(error) => failures.push(CellFailure {
                index,
                cell_id: spec.cells[index].id(),
                error,
            }),
        }
    }
    GridReport { results, failures }
}

fn rot_sym_grid(beta: bool, replicates: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &n in &GRID_SIZES {
        for &p in &GRID_SIZES {
            for j in [1u8, 2] {
                for &ell in &ELLS {
                    let alternative = if beta {
                        Alternative::Beta { j, ell }
                    } else {
                        Alternative::Fvml { j, ell }
                    };
                    cells.push(Cell {
                        n,
                        p,
                        alternative,
                        tests: vec![TestId::SpecifiedTheta, TestId::RayleighHighdim],
                        alpha: DEFAULT_ALPHA,
                        replicates,
                    });
                }
            }
        }
    }
    cells
}

/// FvML grid: `(n, p) ∈ {30, 100, 400}²`, `j ∈ {1, 2}`, `ℓ ∈ {0, …, 4}`.
pub fn figure1_spec(replicates: usize) -> ExperimentSpec {
    ExperimentSpec {
        master_seed: DEFAULT_SEED,
        cells: rot_sym_grid(false, replicates),
    }
}

/// The same grid with beta-matched alternatives.
pub fn figure2_spec(replicates: usize) -> ExperimentSpec {
    ExperimentSpec {
        master_seed: DEFAULT_SEED,
        cells: rot_sym_grid(true, replicates),
    }
}

/// Skew-normal and spiked alternatives at `n = p = 100`.
pub fn figure3_spec(replicates: usize) -> ExperimentSpec {
    let mut cells = Vec::new();
    for skew in [true, false] {
        for &ell in &ELLS {
            cells.push(Cell {
                n: 100,
                p: 100,
                alternative: if skew {
                    Alternative::SkewNormal { ell }
                } else {
                    Alternative::Spiked { ell }
                },
                tests: vec![TestId::RayleighSigns, TestId::John, TestId::SignSphericity],
                alpha: DEFAULT_ALPHA,
                replicates,
            });
        }
    }
    ExperimentSpec {
        master_seed: DEFAULT_SEED,
        cells,
    }
}

/// Replicates per cell used for the rotationally symmetric grids.
pub const FIGURE12_REPLICATES: usize = 2500;
/// Default replicates for the sphericity grid; the full study used 10 000.
pub const FIGURE3_REPLICATES: usize = 1000;
pub const FIGURE3_FULL_REPLICATES: usize = 10_000;
