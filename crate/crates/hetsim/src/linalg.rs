//! Dense complex linear-algebra helpers shared by the precoding code.
//!
//! Thin wrappers around `nalgebra` that pin down the conventions the rest of
//! the crate relies on: singular values in descending order, right singular
//! vectors as columns, orthonormal null-space bases, and log-determinants of
//! Hermitian positive-definite matrices via Cholesky factors.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

/// Relative singular-value threshold below which a direction is treated as
/// numerically zero when computing ranks and null spaces. Random full-rank
/// matrices sit many orders of magnitude above this; only structurally
/// deficient inputs fall below it.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Thin singular value decomposition with descending singular values.
#[derive(Clone, Debug)]
pub struct SvdParts {
    /// Left singular vectors, one per column (`rows x k`).
    pub u: DMatrix<Complex64>,
    /// Singular values in descending order (`k = min(rows, cols)`).
    pub sigma: Vec<f64>,
    /// Right singular vectors, one per column (`cols x k`).
    pub v: DMatrix<Complex64>,
}

impl SvdParts {
    /// Number of singular values above `RANK_REL_TOL` relative to the largest.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma, RANK_REL_TOL)
    }
}

/// Computes the thin SVD `A = U diag(sigma) V^H` of a complex matrix.
///
/// Panics if the decomposition fails to converge, which does not occur for
/// the finite inputs produced by this crate (verified over large random
/// ensembles in the test suite).
pub fn svd_parts(a: &DMatrix<Complex64>) -> SvdParts {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("SVD with compute_u must return U");
    let v_t = svd.v_t.expect("SVD with compute_v must return V^H");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    debug_assert!(
        sigma.windows(2).all(|w| w[0] >= w[1] - 1e-12),
        "singular values must be sorted in descending order"
    );
    SvdParts {
        u,
        sigma,
        v: v_t.adjoint(),
    }
}

/// Counts singular values above `rel_tol` times the largest one.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    let largest = sigma.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Orthonormal basis of the right null space of `a`, one vector per column.
///
/// Returns a `cols x (cols - rank)` matrix; the result has zero columns when
/// `a` has full column rank. A matrix with fewer rows than columns is padded
/// with zero rows before the decomposition so that the full set of right
/// singular vectors is available.
pub fn null_space(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (rows, cols) = a.shape();
    let parts = if rows >= cols {
        svd_parts(a)
    } else {
        let mut padded = DMatrix::<Complex64>::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(a);
        svd_parts(&padded)
    };
    let rank = parts.rank();
    parts.v.columns(rank, cols - rank).into_owned()
}

/// `log2 det(M)` of a Hermitian positive-definite matrix via its Cholesky
/// factor. Returns `None` when the matrix is not positive definite.
///
/// The complex Cholesky routine happily takes complex square roots on
/// indefinite input, so positive definiteness is verified by requiring every
/// factor diagonal to be real and positive.
pub fn log2_det_hermitian_pd(m: &DMatrix<Complex64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let mut log2_det = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        let real_positive = d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re;
        if !real_positive {
            return None;
        }
        log2_det += 2.0 * d.re.log2();
    }
    Some(log2_det)
}

/// Averages a matrix with its adjoint, hiding the asymmetry that floating
/// point products leave on analytically Hermitian matrices.
pub fn hermitianize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Element-wise phase extraction: every entry is replaced by a unit-modulus
/// complex number with the same argument. Zero entries map to `1`.
pub fn phase_matrix(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| {
        let z = a[(r, c)];
        let n = z.norm();
        if n == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            z / n
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, link_stream};
    use approx::assert_relative_eq;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = link_stream(seed, 0, 0);
        let mut m = DMatrix::<Complex64>::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = complex_gaussian(&mut rng);
            }
        }
        m
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        for (rows, cols, seed) in [(4, 7, 1), (7, 4, 2), (6, 6, 3), (1, 5, 4)] {
            let a = random_matrix(rows, cols, seed);
            let parts = svd_parts(&a);
            let k = rows.min(cols);
            let mut sig = DMatrix::<Complex64>::zeros(k, k);
            for i in 0..k {
                sig[(i, i)] = Complex64::new(parts.sigma[i], 0.0);
            }
            let recon = &parts.u * sig * parts.v.adjoint();
            assert_relative_eq!((recon - &a).norm(), 0.0, epsilon = 1e-10 * a.norm());
            assert!(parts.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        // 1. wide full-rank matrix: null dimension = cols - rows
        let a = random_matrix(3, 8, 5);
        let n = null_space(&a);
        assert_eq!(n.shape(), (8, 5));
        let gram = n.adjoint() * &n;
        assert_relative_eq!(
            (gram - DMatrix::<Complex64>::identity(5, 5)).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert!((&a * &n).norm() < 1e-12 * a.norm());

        // 2. tall full-column-rank matrix: empty null space
        let b = random_matrix(8, 3, 6);
        assert_eq!(null_space(&b).ncols(), 0);

        // 3. structurally rank-deficient: repeated rows
        let row = random_matrix(1, 6, 7);
        let mut c = DMatrix::<Complex64>::zeros(3, 6);
        for r in 0..3 {
            c.row_mut(r)
                .copy_from(&(row.row(0) * Complex64::new((r + 1) as f64, 0.0)));
        }
        let nc = null_space(&c);
        assert_eq!(nc.shape(), (6, 5), "rank-1 stack leaves a 5-dim null space");
        assert!((&c * &nc).norm() < 1e-12 * c.norm());
    }

    #[test]
    fn log2_det_matches_lu_determinant() {
        let a = random_matrix(6, 6, 8);
        let q = hermitianize(&(&a * a.adjoint() + DMatrix::<Complex64>::identity(6, 6)));
        let via_chol = log2_det_hermitian_pd(&q).expect("positive definite");
        let det = q.lu().determinant();
        assert!(det.im.abs() < 1e-9 * det.re);
        assert_relative_eq!(via_chol, det.re.log2(), epsilon = 1e-9);
    }

    #[test]
    fn log2_det_rejects_indefinite_input() {
        let mut m = DMatrix::<Complex64>::identity(3, 3);
        m[(2, 2)] = Complex64::new(-1.0, 0.0);
        assert!(log2_det_hermitian_pd(&m).is_none());
    }

    #[test]
    fn phase_matrix_is_unit_modulus_and_preserves_arguments() {
        let a = random_matrix(5, 4, 9);
        let p = phase_matrix(&a);
        for c in 0..4 {
            for r in 0..5 {
                assert_relative_eq!(p[(r, c)].norm(), 1.0, epsilon = 1e-14);
                let expected = a[(r, c)].arg();
                assert_relative_eq!(p[(r, c)].arg(), expected, epsilon = 1e-12);
            }
        }
        let z = DMatrix::<Complex64>::zeros(2, 2);
        let pz = phase_matrix(&z);
        assert_eq!(pz[(0, 0)], Complex64::new(1.0, 0.0));
    }
}
