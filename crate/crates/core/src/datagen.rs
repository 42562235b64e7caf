//! Simulated coefficient tensors, covariates and responses.
//!
//! # Seeds
//!
//! All randomness is drawn from ChaCha8 streams seeded with 64-bit values.
//! Derived seeds come from [`derive_seed`], which folds a list of integers
//! into a parent seed with the SplitMix64 finalizer:
//!
//! ```text
//! h = parent
//! for p in parts: h = mix(h ^ mix(p + 0x9E3779B97F4A7C15))
//! ```
//!
//! A simulated replicate with seed `s` draws the coefficient tensor from
//! `derive_seed(s, [0])`, the covariates from `derive_seed(s, [1])` and the
//! responses from `derive_seed(s, [2])`.

use nalgebra::DVector;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Dataset, GlmFamily};
use crate::projection::{project_theta3_approx, ConstraintSpec};
use crate::spectral::full_svd;
use crate::tensor::{DenseTensor, Matrix};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of integers.
pub fn derive_seed(parent: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(parent, |h, &p| mix(h ^ mix(p.wrapping_add(GOLDEN))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Tensor with i.i.d. standard normal entries.
pub fn gaussian_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = rng_from_seed(seed);
    DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal))
}

/// `T = Σ_k u_{k,1} ⊗ ... ⊗ u_{k,N}` where, for each mode, the vectors
/// `u_{1,m}..u_{r,m}` are the leading left singular vectors of an
/// independent Gaussian `d_m x r` matrix. Each factor group is orthonormal,
/// so `‖T‖_F = √r`.
pub fn gen_cp(dims: &[usize], r: usize, seed: u64) -> Result<DenseTensor> {
    let min_dim = dims.iter().copied().min().unwrap_or(0);
    if r == 0 || r > min_dim {
        return Err(Error::Argument(format!(
            "CP rank {} outside 1..={} for dims {:?}",
            r, min_dim, dims
        )));
    }
    let mut rng = rng_from_seed(seed);
    let factors: Vec<Matrix> = dims
        .iter()
        .map(|&d| Ok(full_svd(&gaussian_matrix(d, r, &mut rng))?.u))
        .collect::<Result<_>>()?;
    Ok(DenseTensor::from_fn(dims, |idx| {
        (0..r)
            .map(|k| {
                idx.iter()
                    .zip(&factors)
                    .map(|(&i, u)| u[(i, k)])
                    .product::<f64>()
            })
            .sum()
    }))
}

/// Approximate Tucker rank-`r` projection of a standard normal tensor.
pub fn gen_tucker(dims: &[usize], r: usize, seed: u64) -> Result<DenseTensor> {
    ConstraintSpec::Theta3 { r }.validate(dims)?;
    let m = gaussian_tensor(dims, seed);
    Ok(project_theta3_approx(&m, r)?.tensor)
}

/// `s` randomly placed nonzero slices, each `Q Qᵀ` for a random `d x r`
/// orthonormal frame `Q`. All nonzero singular values equal one and
/// `‖T‖_F = √(s r)`. Slices must be square.
pub fn gen_sparse_slices(dims: &[usize], r: usize, s: usize, seed: u64) -> Result<DenseTensor> {
    let [d1, d2, d3]: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::Shape(format!("sparse slices need order 3, got {:?}", dims)))?;
    if d1 != d2 {
        return Err(Error::Shape(format!("slices must be square, got {}x{}", d1, d2)));
    }
    ConstraintSpec::Theta2 { r, s }.validate(dims)?;
    let mut rng = rng_from_seed(seed);
    let mut support = sample_indices(&mut rng, d3, s).into_vec();
    support.sort_unstable();
    let mut t = DenseTensor::zeros(dims);
    for j in support {
        let q = gaussian_matrix(d1, r, &mut rng).qr().q();
        t.set_slice(j, &(&q * q.transpose()))?;
    }
    Ok(t)
}

/// `n x D` design whose rows are vectorized standard normal covariates.
/// Entries are drawn row by row.
pub fn gen_design(n: usize, dims: &[usize], seed: u64) -> Matrix {
    let len: usize = dims.iter().product();
    let mut rng = rng_from_seed(seed);
    let mut design = Matrix::zeros(n, len);
    for i in 0..n {
        for j in 0..len {
            design[(i, j)] = rng.sample(StandardNormal);
        }
    }
    design
}

/// `n` independent standard normal covariate tensors; the same draws as
/// [`gen_design`] with the same seed.
pub fn gen_covariates(n: usize, dims: &[usize], seed: u64) -> Vec<DenseTensor> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal)))
        .collect()
}

/// Responses drawn from `family` at linear predictors `theta`.
pub fn gen_response_from_predictor(
    family: &GlmFamily,
    theta: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    family.validate()?;
    let mut rng = rng_from_seed(seed);
    theta.iter().map(|&t| family.sample(t, &mut rng)).collect()
}

/// Responses `Y_i ~ family(<X_i, T>)`.
pub fn gen_response(
    family: &GlmFamily,
    covariates: &[DenseTensor],
    truth: &DenseTensor,
    seed: u64,
) -> Result<Vec<f64>> {
    let theta: Vec<f64> = covariates
        .iter()
        .map(|x| x.inner(truth))
        .collect::<Result<_>>()?;
    gen_response_from_predictor(family, &theta, seed)
}

/// Signal-to-noise ratio of coefficient `t` under `family` with standard
/// normal covariates.
///
/// Gaussian: `‖T‖_F / σ`. Logistic and Poisson: `sd_i(E[Y_i]) / sqrt(mean_i
/// Var[Y_i])` over `samples` Monte-Carlo draws of `<X, T>`, which for
/// standard normal `X` is exactly `N(0, ‖T‖_F²)`.
pub fn snr(t: &DenseTensor, family: &GlmFamily, samples: usize, seed: u64) -> f64 {
    let norm = t.frobenius_norm();
    if let GlmFamily::Gaussian { sigma } = family {
        return if norm == 0.0 { 0.0 } else { norm / sigma };
    }
    if norm == 0.0 || samples < 2 {
        return 0.0;
    }
    let mut rng = rng_from_seed(seed);
    let mut means = Vec::with_capacity(samples);
    let mut noise = 0.0;
    for _ in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        let theta = norm * z;
        means.push(family.response_mean(theta));
        noise += family.response_variance(theta);
    }
    let mu = means.iter().sum::<f64>() / samples as f64;
    let signal = means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / (samples - 1) as f64;
    (signal / (noise / samples as f64)).sqrt()
}

/// Low-rank structure of a simulated coefficient tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Cp { r: usize },
    Tucker { r: usize },
    SparseSlices { r: usize, s: usize },
}

impl Structure {
    pub fn generate(&self, dims: &[usize], seed: u64) -> Result<DenseTensor> {
        match *self {
            Structure::Cp { r } => gen_cp(dims, r, seed),
            Structure::Tucker { r } => gen_tucker(dims, r, seed),
            Structure::SparseSlices { r, s } => gen_sparse_slices(dims, r, s, seed),
        }
    }

    /// The cone the generated tensors belong to, at the true parameters.
    /// CP tensors are handled through their Tucker ranks.
    pub fn constraint(&self) -> ConstraintSpec {
        match *self {
            Structure::Cp { r } | Structure::Tucker { r } => ConstraintSpec::Theta3 { r },
            Structure::SparseSlices { r, s } => ConstraintSpec::Theta2 { r, s },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrLevel {
    High,
    Moderate,
    Low,
}

impl SnrLevel {
    pub const ALL: [SnrLevel; 3] = [SnrLevel::High, SnrLevel::Moderate, SnrLevel::Low];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SnrLevel::High => "High",
            SnrLevel::Moderate => "Moderate",
            SnrLevel::Low => "Low",
        }
    }
}

impl std::str::FromStr for SnrLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(SnrLevel::High),
            "moderate" => Ok(SnrLevel::Moderate),
            "low" => Ok(SnrLevel::Low),
            _ => Err(Error::Argument(format!("unknown SNR level {:?}", s))),
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: String,
    pub structure: Structure,
    pub dims: Vec<usize>,
    pub n: usize,
    pub family: GlmFamily,
    pub snr: SnrLevel,
    /// Default PGD step size for this setting and SNR level.
    pub eta: f64,
    /// Default PGD iteration cap.
    pub max_iters: usize,
}

struct CaseRow {
    id: &'static str,
    structure: Structure,
    d: usize,
    order: usize,
    n: usize,
    families: &'static [GlmFamily],
    etas: &'static [f64],
    max_iters: usize,
}

const fn gauss(sigma: f64) -> GlmFamily {
    GlmFamily::Gaussian { sigma }
}

const fn logit(m: u32, alpha: f64) -> GlmFamily {
    GlmFamily::Logistic { m, alpha }
}

const fn pois(m: f64, alpha: f64) -> GlmFamily {
    GlmFamily::Poisson { m, alpha }
}

const CP5: Structure = Structure::Cp { r: 5 };
const TUCKER5: Structure = Structure::Tucker { r: 5 };
const SLICES55: Structure = Structure::SparseSlices { r: 5, s: 5 };

#[rustfmt::skip]
const CASES: &[CaseRow] = &[
    CaseRow { id: "1a", structure: CP5, d: 50, order: 3, n: 4000, families: &[gauss(0.5)], etas: &[0.5], max_iters: 300 },
    CaseRow { id: "2a", structure: TUCKER5, d: 50, order: 3, n: 4000, families: &[gauss(5.0)], etas: &[0.5], max_iters: 300 },
    CaseRow { id: "3a", structure: SLICES55, d: 50, order: 3, n: 4000, families: &[gauss(1.0)], etas: &[0.5], max_iters: 300 },
    CaseRow { id: "4a", structure: CP5, d: 20, order: 4, n: 4000, families: &[gauss(0.5)], etas: &[0.2], max_iters: 300 },
    CaseRow { id: "5a", structure: TUCKER5, d: 20, order: 4, n: 4000, families: &[gauss(5.0)], etas: &[0.2], max_iters: 300 },
    CaseRow { id: "1b", structure: CP5, d: 50, order: 3, n: 4000, families: &[logit(22, 1.0)], etas: &[0.05], max_iters: 600 },
    CaseRow { id: "1c", structure: CP5, d: 50, order: 3, n: 4000, families: &[pois(10.0, 0.5)], etas: &[0.05], max_iters: 600 },
    CaseRow { id: "6a", structure: CP5, d: 10, order: 3, n: 1000, families: &[gauss(0.5), gauss(1.0), gauss(2.0)], etas: &[0.5, 0.5, 0.5], max_iters: 300 },
    CaseRow { id: "7a", structure: TUCKER5, d: 10, order: 3, n: 1000, families: &[gauss(2.5), gauss(5.0), gauss(10.0)], etas: &[0.5, 0.5, 0.5], max_iters: 300 },
    CaseRow { id: "8a", structure: SLICES55, d: 10, order: 3, n: 1000, families: &[gauss(0.5), gauss(1.0), gauss(2.0)], etas: &[0.5, 0.5, 0.5], max_iters: 300 },
    CaseRow { id: "6b", structure: CP5, d: 10, order: 3, n: 1000, families: &[logit(20, 3.5), logit(5, 3.5), logit(1, 3.5)], etas: &[0.01, 0.01, 0.02], max_iters: 1000 },
    CaseRow { id: "7b", structure: TUCKER5, d: 10, order: 3, n: 1000, families: &[logit(20, 0.5), logit(5, 0.5), logit(1, 0.5)], etas: &[0.5, 1.0, 1.0], max_iters: 1000 },
    CaseRow { id: "8b", structure: SLICES55, d: 10, order: 3, n: 1000, families: &[logit(20, 1.2), logit(5, 1.2), logit(1, 1.2)], etas: &[0.02, 0.05, 0.05], max_iters: 1000 },
    CaseRow { id: "6c", structure: CP5, d: 10, order: 3, n: 1000, families: &[pois(20.0, 0.5), pois(5.0, 0.5), pois(1.0, 0.5)], etas: &[0.01, 0.01, 0.01], max_iters: 1000 },
    CaseRow { id: "7c", structure: TUCKER5, d: 10, order: 3, n: 1000, families: &[pois(20.0, 0.06), pois(5.0, 0.06), pois(1.0, 0.06)], etas: &[0.5, 0.5, 1.0], max_iters: 1000 },
    CaseRow { id: "8c", structure: SLICES55, d: 10, order: 3, n: 1000, families: &[pois(30.0, 0.25), pois(10.0, 0.25), pois(5.0, 0.25)], etas: &[0.01, 0.02, 0.02], max_iters: 1000 },
];

impl CaseSpec {
    /// All case identifiers in table order.
    pub fn ids() -> impl Iterator<Item = &'static str> {
        CASES.iter().map(|c| c.id)
    }

    /// SNR levels defined for a case (the convergence cases have one).
    pub fn levels(id: &str) -> Result<Vec<SnrLevel>> {
        let row = find_case(id)?;
        Ok(SnrLevel::ALL[..row.families.len()].to_vec())
    }

    /// Whether the case is one of the large `d = 50` / `d = 20` settings.
    pub fn is_heavy(id: &str) -> Result<bool> {
        let row = find_case(id)?;
        Ok(row.d.pow(row.order as u32) * row.n > 10_000_000)
    }

    pub fn lookup(id: &str, snr: SnrLevel) -> Result<Self> {
        let row = find_case(id)?;
        let family = *row.families.get(snr.index()).ok_or_else(|| {
            Error::Argument(format!("case {} has no {} SNR setting", id, snr.name()))
        })?;
        Ok(CaseSpec {
            id: row.id.to_string(),
            structure: row.structure,
            dims: vec![row.d; row.order],
            n: row.n,
            family,
            snr,
            eta: row.etas[snr.index()],
            max_iters: row.max_iters,
        })
    }

    /// Same setting with a different sample size.
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn generate_truth(&self, seed: u64) -> Result<DenseTensor> {
        self.structure.generate(&self.dims, derive_seed(seed, &[0]))
    }

    /// Draws `(T, X, Y)` for one replicate.
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        let truth = self.generate_truth(seed)?;
        let design = gen_design(self.n, &self.dims, derive_seed(seed, &[1]));
        let theta = &design * DVector::from_column_slice(truth.data());
        let y = gen_response_from_predictor(
            &self.family,
            theta.as_slice(),
            derive_seed(seed, &[2]),
        )?;
        Dataset::from_design(self.dims.clone(), design, y, self.family, Some(truth))
    }
}

fn find_case(id: &str) -> Result<&'static CaseRow> {
    CASES
        .iter()
        .find(|c| c.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::Argument(format!("unknown case {:?}", id)))
}
