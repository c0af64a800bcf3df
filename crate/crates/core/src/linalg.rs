//! Dense linear algebra helpers shared by the estimators.
//!
//! Everything routes through nalgebra's symmetric eigensolver with a fixed
//! ordering and sign convention, so identical inputs always produce identical
//! bytes.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition-number guard applied to every linear solve.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Error, Debug)]
pub enum LinalgError {
    #[error("matrix is rank deficient (σ_min/σ_max = {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("system is ill-conditioned (condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e})")]
    IllConditioned { cond: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
}

/// Symmetric eigendecomposition with eigenvalues sorted in non-increasing
/// order and a deterministic sign fix per eigenvector: the entry of largest
/// absolute value is made positive, ties broken by lowest index.
///
/// The input is symmetrised as (S + Sᵀ)/2 first to kill roundoff asymmetry.
pub fn sym_eigen_desc(mat: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    assert_eq!(mat.nrows(), mat.ncols(), "eigendecomposition needs a square matrix");
    let n = mat.nrows();
    let sym = (mat + mat.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::EigenFailure("non-finite matrix entries".into()));
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).clone_owned();
        sign_fix(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

fn sign_fix(col: &mut Vector) {
    let mut lead = 0usize;
    let mut best = 0.0f64;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            lead = i;
        }
    }
    if col[lead] < 0.0 {
        col.neg_mut();
    }
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
pub fn spectral_norm_sym(mat: &Matrix) -> Result<f64, LinalgError> {
    let (values, _) = sym_eigen_desc(mat)?;
    Ok(values
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Orthogonal projector X(XᵀX)⁻¹Xᵀ onto the column space of `x`.
///
/// Errors when `x` is (numerically) rank deficient.
pub fn projector(x: &Matrix) -> Result<Matrix, LinalgError> {
    let basis = orthonormal_basis(x)?;
    Ok(&basis * basis.transpose())
}

/// Orthonormal basis of the column space via SVD, with a rank guard.
pub fn orthonormal_basis(x: &Matrix) -> Result<Matrix, LinalgError> {
    let r = x.ncols();
    assert!(r > 0, "basis of an empty matrix");
    let svd = x.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin / smax < 1e-12 || svd.singular_values.len() < r {
        return Err(LinalgError::RankDeficient {
            ratio: if smax > 0.0 { smin / smax } else { 0.0 },
        });
    }
    let u = svd.u.expect("u requested");
    Ok(u.columns(0, r).clone_owned())
}

/// Half-orthogonal complement of a full-column-rank `p × r` matrix: a
/// `p × (p-r)` matrix with orthonormal columns spanning the orthogonal
/// complement of col(a). For `r = 0` returns the identity.
pub fn orthonormal_complement(a: &Matrix) -> Result<Matrix, LinalgError> {
    let p = a.nrows();
    let r = a.ncols();
    if r == 0 {
        return Ok(Matrix::identity(p, p));
    }
    if r >= p {
        return Ok(Matrix::zeros(p, 0));
    }
    let basis = orthonormal_basis(a)?;
    let proj = Matrix::identity(p, p) - &basis * basis.transpose();
    // Eigenvalues of the complement projector cluster at 1 (complement) and 0.
    let (values, vectors) = sym_eigen_desc(&proj)?;
    debug_assert!(values[p - r - 1] > 0.5 && values[p - r] < 0.5);
    Ok(vectors.columns(0, p - r).clone_owned())
}

/// Solves the symmetric positive definite system `gram · x = rhs` through its
/// eigendecomposition, guarding the condition number at [`CONDITION_LIMIT`].
pub fn solve_gram(gram: &Matrix, rhs: &Matrix) -> Result<Matrix, LinalgError> {
    let (values, vectors) = sym_eigen_desc(gram)?;
    let lambda_max = values.first().copied().unwrap_or(0.0);
    let lambda_min = values.last().copied().unwrap_or(0.0);
    if lambda_min <= 0.0 || lambda_max / lambda_min > CONDITION_LIMIT {
        return Err(LinalgError::IllConditioned {
            cond: if lambda_min > 0.0 {
                lambda_max / lambda_min
            } else {
                f64::INFINITY
            },
        });
    }
    let mut scaled = vectors.transpose() * rhs;
    for (i, lambda) in values.iter().enumerate() {
        let mut row = scaled.row_mut(i);
        row /= *lambda;
    }
    Ok(&vectors * scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_sign_fixed() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let (values, vectors) = sym_eigen_desc(&m).unwrap();
        assert_eq!(values, vec![4.0, 1.0]);
        assert_eq!(vectors[(1, 0)], 1.0);
        assert_eq!(vectors[(0, 1)], 1.0);
    }

    #[test]
    fn eigen_deterministic_on_degenerate_spectrum() {
        let m = Matrix::identity(3, 3) * 2.0;
        let a = sym_eigen_desc(&m).unwrap();
        let b = sym_eigen_desc(&m).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let a = Matrix::from_row_slice(4, 2, &[1.0, 0.2, -0.3, 1.0, 0.5, 0.5, 0.0, -1.0]);
        let c = orthonormal_complement(&a).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (4, 2));
        let gram = c.transpose() * &c;
        assert!((gram - Matrix::identity(2, 2)).norm() < 1e-12);
        assert!((a.transpose() * &c).norm() < 1e-12);
    }

    #[test]
    fn solve_gram_guards_condition_number() {
        let gram = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        let rhs = Matrix::from_element(2, 1, 1.0);
        assert!(matches!(
            solve_gram(&gram, &rhs),
            Err(LinalgError::IllConditioned { .. })
        ));
        let good = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_gram(&good, &rhs).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((x[(1, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn projector_rejects_rank_deficiency() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            projector(&x),
            Err(LinalgError::RankDeficient { .. })
        ));
    }
}
