//! Projections onto the three low-rank tensor cones.
//!
//! * `Theta1(r)`: order-3 tensors whose slice ranks sum to at most `r`.
//! * `Theta2(r, s)`: every slice has rank at most `r` and at most `s` slices
//!   are nonzero.
//! * `Theta3(r)`: every mode matricization has rank at most `r` (Tucker ranks).
//!
//! The first two projections are exact Euclidean projections. `Theta1` is the
//! best rank-`r` approximation of the block-diagonal matrix built from the
//! slices: every slice is factorized and the `r` globally largest singular
//! triplets survive. `Theta2` truncates each slice to rank `r` and then keeps
//! the `s` truncated slices of largest Frobenius norm. `Theta3` uses the
//! sequential mode-wise truncation, which is only an approximate projection.
//!
//! Ties (equal singular values or equal slice norms at the cut) resolve to the
//! lowest slice index, then the lowest triplet index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{best_rank, full_svd, numerical_rank, top_s_select, SvdTriple};
use crate::tensor::{matrix_norm, DenseTensor, Matrix};

/// Relative singular value threshold used by membership checks.
pub const RANK_TOL: f64 = 1e-9;

/// Maximum number of sweeps of the mode-wise truncation.
pub const TUCKER_MAX_PASSES: usize = 3;

/// Which cone PGD projects onto, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstraintSpec {
    Theta1 { r: usize },
    Theta2 { r: usize, s: usize },
    Theta3 { r: usize },
}

impl ConstraintSpec {
    /// Checks that the cone parameters make sense for tensors of shape `dims`.
    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        let fail = |msg: String| Err(Error::Argument(msg));
        match *self {
            ConstraintSpec::Theta1 { r } => {
                let [d1, d2, d3] = order3(dims)?;
                let max = d3 * d1.min(d2);
                if r == 0 || r > max {
                    return fail(format!("Theta1 rank {} outside 1..={}", r, max));
                }
            }
            ConstraintSpec::Theta2 { r, s } => {
                let [d1, d2, d3] = order3(dims)?;
                if r == 0 || r > d1.min(d2) {
                    return fail(format!("Theta2 rank {} outside 1..={}", r, d1.min(d2)));
                }
                if s == 0 || s > d3 {
                    return fail(format!("Theta2 sparsity {} outside 1..={}", s, d3));
                }
            }
            ConstraintSpec::Theta3 { r } => {
                if dims.len() < 2 {
                    return fail("Theta3 needs a tensor of order at least 2".into());
                }
                let max = max_tucker_rank(dims);
                if r == 0 || r > max {
                    return fail(format!("Theta3 rank {} outside 1..={}", r, max));
                }
            }
        }
        Ok(())
    }

    /// Projects `a` onto the cone. For `Theta3` this is the approximate
    /// mode-wise projection; a failure to reach the target ranks within
    /// [`TUCKER_MAX_PASSES`] is logged and the last iterate returned.
    pub fn project(&self, a: &DenseTensor) -> Result<DenseTensor> {
        self.validate(a.dims())?;
        match *self {
            ConstraintSpec::Theta1 { r } => project_theta1(a, r),
            ConstraintSpec::Theta2 { r, s } => project_theta2(a, r, s),
            ConstraintSpec::Theta3 { r } => {
                let p = project_theta3_approx(a, r)?;
                if !p.ranks_verified {
                    log::warn!("Tucker projection left mode ranks {:?} > {}", p.mode_ranks, r);
                }
                Ok(p.tensor)
            }
        }
    }

    /// Whether `a` satisfies the cone's definition, with singular values and
    /// slice norms below `rel_tol * ‖a‖_F` counted as zero.
    pub fn is_member(&self, a: &DenseTensor, rel_tol: f64) -> Result<bool> {
        self.validate(a.dims())?;
        let tol = rel_tol * a.frobenius_norm();
        Ok(match *self {
            ConstraintSpec::Theta1 { r } => slice_ranks(a, tol)?.iter().sum::<usize>() <= r,
            ConstraintSpec::Theta2 { r, s } => {
                let ranks = slice_ranks(a, tol)?;
                let nonzero = ranks.iter().filter(|&&k| k > 0).count();
                ranks.iter().all(|&k| k <= r) && nonzero <= s
            }
            ConstraintSpec::Theta3 { r } => mode_ranks(a, tol)?.iter().all(|&k| k <= r),
        })
    }

    pub fn rank(&self) -> usize {
        match *self {
            ConstraintSpec::Theta1 { r }
            | ConstraintSpec::Theta2 { r, .. }
            | ConstraintSpec::Theta3 { r } => r,
        }
    }
}

fn order3(dims: &[usize]) -> Result<[usize; 3]> {
    dims.try_into()
        .map_err(|_| Error::Shape(format!("expected an order-3 tensor, got dims {:?}", dims)))
}

/// Largest `r` for which `Theta3(r)` is not the whole space restricted to one mode.
pub fn max_tucker_rank(dims: &[usize]) -> usize {
    let total: usize = dims.iter().product();
    dims.iter().map(|&d| d.min(total / d)).max().unwrap_or(0)
}

/// Numerical rank of every slice of an order-3 tensor.
pub fn slice_ranks(a: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    let (_, _, d3) = a.order3_dims()?;
    (0..d3)
        .map(|j| {
            let m = a.slice(j)?;
            if matrix_norm(&m) <= tol {
                Ok(0)
            } else {
                numerical_rank(&m, tol)
            }
        })
        .collect()
}

/// Numerical rank of every mode matricization.
pub fn mode_ranks(a: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    (0..a.order())
        .map(|k| numerical_rank(&a.matricize(k)?, tol))
        .collect()
}

/// Exact projection onto `Theta1(r)`.
pub fn project_theta1(a: &DenseTensor, r: usize) -> Result<DenseTensor> {
    ConstraintSpec::Theta1 { r }.validate(a.dims())?;
    let (_, _, d3) = a.order3_dims()?;
    let svds: Vec<SvdTriple> = (0..d3)
        .map(|j| full_svd(&a.slice(j)?))
        .collect::<Result<_>>()?;

    // (singular value, slice, triplet) in slice-major order; the stable sort
    // keeps that order among ties.
    let mut triplets: Vec<(f64, usize, usize)> = svds
        .iter()
        .enumerate()
        .flat_map(|(j, svd)| svd.s.iter().enumerate().map(move |(i, &s)| (s, j, i)))
        .collect();
    triplets.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut keep = vec![0usize; d3];
    for &(s, j, i) in triplets.iter().take(r) {
        if s > 0.0 {
            // per-slice triplets are sorted, so the kept ones form a prefix
            keep[j] = keep[j].max(i + 1);
        }
    }

    let mut out = DenseTensor::zeros(a.dims());
    for (j, svd) in svds.into_iter().enumerate() {
        if keep[j] > 0 {
            out.set_slice(j, &svd.truncate(keep[j]).reconstruct())?;
        }
    }
    Ok(out)
}

/// Exact projection onto `Theta2(r, s)`: rank-`r` truncation of every slice,
/// then the `s` largest truncated slices are kept.
pub fn project_theta2(a: &DenseTensor, r: usize, s: usize) -> Result<DenseTensor> {
    ConstraintSpec::Theta2 { r, s }.validate(a.dims())?;
    let (_, _, d3) = a.order3_dims()?;
    let truncated: Vec<Matrix> = (0..d3)
        .map(|j| best_rank(&a.slice(j)?, r))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = truncated.iter().map(matrix_norm).collect();
    let support = top_s_select(&norms, s)?;
    let mut out = DenseTensor::zeros(a.dims());
    for j in support {
        out.set_slice(j, &truncated[j])?;
    }
    Ok(out)
}

/// Result of the approximate Tucker projection.
#[derive(Debug, Clone)]
pub struct TuckerProjection {
    pub tensor: DenseTensor,
    /// Number of full sweeps over the modes.
    pub passes: usize,
    /// Mode ranks of the result at the [`RANK_TOL`] threshold.
    pub mode_ranks: Vec<usize>,
    /// `false` if some mode rank still exceeds the target after the last pass.
    pub ranks_verified: bool,
}

/// Mode-wise truncation in mode order `0, 1, ..., N-1`.
pub fn project_theta3_approx(a: &DenseTensor, r: usize) -> Result<TuckerProjection> {
    let order: Vec<usize> = (0..a.order()).collect();
    project_theta3_with_order(a, r, &order)
}

/// Mode-wise truncation `M_k⁻¹ ∘ P_r ∘ M_k` applied for each `k` in `modes`.
/// After a sweep all mode ranks are checked; if any exceeds `r` the sweep is
/// repeated, at most [`TUCKER_MAX_PASSES`] times.
pub fn project_theta3_with_order(
    a: &DenseTensor,
    r: usize,
    modes: &[usize],
) -> Result<TuckerProjection> {
    ConstraintSpec::Theta3 { r }.validate(a.dims())?;
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    if sorted != (0..a.order()).collect::<Vec<_>>() {
        return Err(Error::Argument(format!(
            "mode order {:?} is not a permutation of 0..{}",
            modes,
            a.order()
        )));
    }

    let dims = a.dims().to_vec();
    let mut t = a.clone();
    let mut passes = 0;
    loop {
        for &k in modes {
            let m = t.matricize(k)?;
            t = DenseTensor::dematricize(&best_rank(&m, r)?, k, &dims)?;
        }
        passes += 1;
        let ranks = mode_ranks(&t, RANK_TOL * t.frobenius_norm())?;
        let ok = ranks.iter().all(|&k| k <= r);
        if ok || passes >= TUCKER_MAX_PASSES {
            return Ok(TuckerProjection {
                tensor: t,
                passes,
                mode_ranks: ranks,
                ranks_verified: ok,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal))
    }

    #[test]
    fn theta1_scalar_slices() {
        let a = DenseTensor::new(vec![1, 1, 3], vec![3.0, 2.0, 1.0]).unwrap();
        let p = project_theta1(&a, 2).unwrap();
        assert_eq!(p.data(), &[3.0, 2.0, 0.0]);
    }

    #[test]
    fn theta1_ties_go_to_lowest_slice() {
        let a = DenseTensor::new(vec![1, 1, 3], vec![1.0, -1.0, 1.0]).unwrap();
        let p = project_theta1(&a, 2).unwrap();
        assert_eq!(p.data(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn theta1_fixed_point_and_membership() {
        let a = gaussian(&[4, 4, 3], 1);
        let p = project_theta1(&a, 3).unwrap();
        let spec = ConstraintSpec::Theta1 { r: 3 };
        assert!(spec.is_member(&p, RANK_TOL).unwrap());
        assert!(!spec.is_member(&a, RANK_TOL).unwrap());
        let pp = project_theta1(&p, 3).unwrap();
        assert!(pp.distance(&p).unwrap() < 1e-10 * p.frobenius_norm());
    }

    #[test]
    fn theta2_membership_and_equivariance() {
        let a = gaussian(&[5, 5, 6], 2);
        let p = project_theta2(&a, 2, 2).unwrap();
        let spec = ConstraintSpec::Theta2 { r: 2, s: 2 };
        assert!(spec.is_member(&p, RANK_TOL).unwrap());
        let q = project_theta2(&a.scaled(-2.0), 2, 2).unwrap();
        assert!(q.distance(&p.scaled(-2.0)).unwrap() < 1e-10 * q.frobenius_norm());
        let pp = project_theta2(&p, 2, 2).unwrap();
        assert!(pp.distance(&p).unwrap() < 1e-10 * p.frobenius_norm());
    }

    #[test]
    fn theta3_rank_one_fixed_point() {
        let t = DenseTensor::outer(&[&[1.0, 2.0, 0.5], &[-1.0, 0.3, 2.0, 1.0], &[0.7, 0.1]]);
        for r in 1..=2 {
            let p = project_theta3_approx(&t, r).unwrap();
            assert!(p.ranks_verified);
            assert_eq!(p.passes, 1);
            assert!(p.tensor.distance(&t).unwrap() < 1e-12 * t.frobenius_norm());
        }
    }

    #[test]
    fn theta3_random_mode_ranks() {
        let a = gaussian(&[6, 6, 6], 3);
        let p = project_theta3_approx(&a, 2).unwrap();
        assert!(p.ranks_verified);
        assert_eq!(p.mode_ranks, vec![2, 2, 2]);
        let again = project_theta3_approx(&p.tensor, 2).unwrap();
        assert!(again.tensor.distance(&p.tensor).unwrap() < 1e-9 * p.tensor.frobenius_norm());
    }

    #[test]
    fn theta3_order_four() {
        let a = gaussian(&[3, 4, 3, 2], 4);
        let p = project_theta3_approx(&a, 2).unwrap();
        assert!(p.mode_ranks.iter().all(|&k| k <= 2));
        let alt = project_theta3_with_order(&a, 2, &[3, 2, 1, 0]).unwrap();
        assert!(alt.mode_ranks.iter().all(|&k| k <= 2));
        assert!(project_theta3_with_order(&a, 2, &[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn spec_validation() {
        let dims = [4, 5, 3];
        assert!(ConstraintSpec::Theta1 { r: 12 }.validate(&dims).is_ok());
        assert!(ConstraintSpec::Theta1 { r: 13 }.validate(&dims).is_err());
        assert!(ConstraintSpec::Theta2 { r: 4, s: 3 }.validate(&dims).is_ok());
        assert!(ConstraintSpec::Theta2 { r: 5, s: 3 }.validate(&dims).is_err());
        assert!(ConstraintSpec::Theta2 { r: 1, s: 4 }.validate(&dims).is_err());
        assert!(ConstraintSpec::Theta3 { r: 5 }.validate(&dims).is_ok());
        assert!(ConstraintSpec::Theta3 { r: 6 }.validate(&dims).is_err());
        assert!(ConstraintSpec::Theta2 { r: 1, s: 1 }.validate(&[4, 4]).is_err());
    }
}
