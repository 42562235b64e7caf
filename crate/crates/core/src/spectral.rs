//! Truncated SVD, Eckart–Young truncation and top-`s` magnitude selection.
//!
//! The SVD itself comes from faer; everything here is deterministic for a
//! given input. Singular triplets are returned in
//! nonincreasing order of singular value, ties keeping the order the
//! factorization produced.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Accepted relative reconstruction error of a factorization.
const SVD_RECONSTRUCTION_TOL: f64 = 1e-11;

/// Top singular triplets `M ≈ U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    /// `rows x r`, orthonormal columns.
    pub u: Matrix,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub v: Matrix,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (mut col, &s) in us.column_iter_mut().zip(&self.s) {
            col *= s;
        }
        us * self.v.transpose()
    }

    /// Keeps only the first `r` triplets.
    pub fn truncate(mut self, r: usize) -> Self {
        let r = r.min(self.s.len());
        self.s.truncate(r);
        self.u = self.u.columns(0, r).into_owned();
        self.v = self.v.columns(0, r).into_owned();
        self
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("matrix has non-finite entries".into()))
    }
}

/// Thin SVD with all `min(rows, cols)` triplets, sorted.
pub fn full_svd(m: &Matrix) -> Result<SvdTriple> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let failed = || Error::Numeric(format!("SVD of a {}x{} matrix failed to converge", rows, cols));
    let svd = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)])
        .thin_svd()
        .map_err(|_| failed())?;
    let (fu, fv) = (svd.U(), svd.V());
    let fs = svd.S().column_vector();
    let k = rows.min(cols);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
    let u = Matrix::from_fn(rows, k, |i, j| fu[(i, order[j])]);
    let v = Matrix::from_fn(cols, k, |i, j| fv[(i, order[j])]);
    let s = order.iter().map(|&j| fs[j]).collect();
    let triple = SvdTriple { u, s, v };
    if (triple.reconstruct() - m).norm() > SVD_RECONSTRUCTION_TOL * m.norm() {
        return Err(failed());
    }
    Ok(triple)
}

/// Top-`r` singular triplets of `m`. Requires `1 <= r <= min(rows, cols)`.
pub fn truncated_svd(m: &Matrix, r: usize) -> Result<SvdTriple> {
    let k = m.nrows().min(m.ncols());
    if r == 0 || r > k {
        return Err(Error::Argument(format!(
            "rank {} out of range 1..={} for a {}x{} matrix",
            r,
            k,
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(full_svd(m)?.truncate(r))
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(full_svd(m)?.s)
}

/// Number of singular values strictly above `threshold`.
pub fn numerical_rank(m: &Matrix, threshold: f64) -> Result<usize> {
    Ok(singular_values(m)?
        .into_iter()
        .filter(|&s| s > threshold)
        .count())
}

/// Best rank-`r` approximation in Frobenius norm (Eckart–Young). `r = 0`
/// gives the zero matrix; `r >= min(rows, cols)` returns `m` unchanged.
pub fn best_rank(m: &Matrix, r: usize) -> Result<Matrix> {
    check_finite(m)?;
    if r == 0 {
        return Ok(Matrix::zeros(m.nrows(), m.ncols()));
    }
    if r >= m.nrows().min(m.ncols()) {
        return Ok(m.clone());
    }
    Ok(truncated_svd(m, r)?.reconstruct())
}

/// Singular value soft thresholding: `s_i <- max(s_i - t, 0)`.
pub fn soft_threshold_singular(m: &Matrix, t: f64) -> Result<Matrix> {
    if t == 0.0 {
        check_finite(m)?;
        return Ok(m.clone());
    }
    let mut svd = full_svd(m)?;
    let keep = svd.s.iter().take_while(|&&s| s > t).count();
    for s in svd.s.iter_mut() {
        *s = (*s - t).max(0.0);
    }
    if keep == 0 {
        return Ok(Matrix::zeros(m.nrows(), m.ncols()));
    }
    Ok(svd.truncate(keep).reconstruct())
}

/// Indices of the `s` largest `|v_i|`, ties broken towards the lowest index.
/// The result is sorted ascending.
pub fn top_s_select(v: &[f64], s: usize) -> Result<Vec<usize>> {
    if s > v.len() {
        return Err(Error::Argument(format!(
            "cannot select {} of {} entries",
            s,
            v.len()
        )));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let mut picked = order[..s].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix. Test oracle only.
    fn jacobi_eigenvalues(mut a: Matrix) -> Vec<f64> {
        let n = a.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn diagonal_singular_values() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let svd = truncated_svd(&m, 2).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-14 && (svd.s[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_singular_values() {
        let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let v = nalgebra::DVector::from_vec(vec![3.0, 4.0]);
        let m = &u * v.transpose();
        let svd = full_svd(&m).unwrap();
        assert!((svd.s[0] - 15.0).abs() < 1e-12);
        assert!(svd.s[1].abs() < 1e-12);
    }

    #[test]
    fn svd_matches_gram_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = gaussian(8, 6, &mut rng);
        let svd = full_svd(&m).unwrap();
        let ev = jacobi_eigenvalues(m.transpose() * &m);
        for (s, e) in svd.s.iter().zip(&ev) {
            assert!((s - e.max(0.0).sqrt()).abs() < 1e-8, "{} vs {}", s, e);
        }
        let eye = Matrix::identity(6, 6);
        assert!((svd.u.transpose() * &svd.u - &eye).norm() < 1e-10);
        assert!((svd.v.transpose() * &svd.v - &eye).norm() < 1e-10);
        assert!((svd.reconstruct() - &m).norm() <= 1e-8 * m.norm());
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncated_svd_errors() {
        let m = Matrix::zeros(3, 4);
        assert!(matches!(truncated_svd(&m, 0), Err(Error::Argument(_))));
        assert!(matches!(truncated_svd(&m, 4), Err(Error::Argument(_))));
        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(truncated_svd(&bad, 1), Err(Error::Numeric(_))));
    }

    #[test]
    fn best_rank_diagonal() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let b = best_rank(&m, 2).unwrap();
        let expected = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 0.0]));
        assert!((&b - expected).norm() < 1e-12);
        assert!(((&b - &m).norm() - 1.0).abs() < 1e-12);
        assert_eq!(best_rank(&m, 0).unwrap(), Matrix::zeros(3, 3));
    }

    #[test]
    fn best_rank_fixed_point_for_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian(7, 2, &mut rng) * gaussian(2, 9, &mut rng);
        let b = best_rank(&m, 3).unwrap();
        assert!((&b - &m).norm() < 1e-10 * m.norm());
    }

    #[test]
    fn best_rank_error_is_tail_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = gaussian(10, 10, &mut rng);
        let ev = jacobi_eigenvalues(m.transpose() * &m);
        let tail: f64 = ev[3..].iter().sum();
        let err = (best_rank(&m, 3).unwrap() - &m).norm_squared();
        assert!((err - tail).abs() <= 1e-8 * tail);
    }

    #[test]
    fn best_rank_scale_equivariant_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = gaussian(6, 8, &mut rng);
        let b = best_rank(&m, 2).unwrap();
        let neg = best_rank(&(&m * -2.5), 2).unwrap();
        assert!((neg - &b * -2.5).norm() < 1e-10 * m.norm());
        let bb = best_rank(&b, 2).unwrap();
        assert!((bb - &b).norm() < 1e-10 * m.norm());
    }

    #[test]
    fn eckart_young_beats_random_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = gaussian(6, 6, &mut rng);
        let best = (best_rank(&m, 1).unwrap() - &m).norm();
        for _ in 0..1000 {
            let u = gaussian(6, 1, &mut rng).normalize();
            let v = gaussian(6, 1, &mut rng).normalize();
            // optimal scale for the pair
            let c = (u.transpose() * &m * &v)[(0, 0)];
            let err = (&u * v.transpose() * c - &m).norm();
            assert!(err >= best - 1e-12);
        }
    }

    #[test]
    fn soft_threshold_shrinks_spectrum() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let out = soft_threshold_singular(&m, 2.0).unwrap();
        let s = singular_values(&out).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12);
        assert_eq!(soft_threshold_singular(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn top_s_examples() {
        assert_eq!(top_s_select(&[5.0, -7.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(top_s_select(&[1.0, 2.0, 3.0], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_s_select(&[1.0, -1.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert!(top_s_select(&[1.0], 2).is_err());
    }

    fn residual(v: &[f64], support: &[usize]) -> f64 {
        v.iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(_, x)| x * x)
            .sum()
    }

    #[test]
    fn top_s_matches_exhaustive_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let picked = top_s_select(&v, 4).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << 12) {
            if mask.count_ones() != 4 {
                continue;
            }
            let support: Vec<usize> = (0..12).filter(|i| mask >> i & 1 == 1).collect();
            best = best.min(residual(&v, &support));
        }
        assert!((residual(&v, &picked) - best).abs() < 1e-14);
    }
}
