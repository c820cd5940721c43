//! Small dense linear-algebra kernel.
//!
//! Eigenvalues, SVD and Cholesky factors come from `nalgebra`; the Stein
//! solver and the log-determinant are built here on top of them.

use nalgebra::{Cholesky, ComplexField, DMatrix, Dyn, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// Largest state dimension solved by Kronecker vectorization. Above this the
/// squared-matrix doubling recurrence is used.
const STEIN_VECTORIZE_MAX: usize = 10;

pub(crate) fn ensure_finite<T: ComplexField>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Builds a matrix from row vectors, rejecting ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols_if_empty: usize) -> Result<Matrix> {
    let cols = rows.first().map_or(cols_if_empty, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Dimension(format!(
            "row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Eigenvalues of a general real square matrix (real Schur form).
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        _ => {
            let schur = Schur::try_new(m.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(Error::EigenFailure)?;
            Ok(schur.complex_eigenvalues().iter().copied().collect())
        }
    }
}

/// `max_k |lambda_k(M)|`. Zero for the empty matrix.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.into_iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Largest singular value of a real or complex matrix.
pub fn max_singular_value<T>(m: &DMatrix<T>) -> Result<f64>
where
    T: ComplexField<RealField = f64>,
{
    ensure_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let svd = SVD::try_new(m.clone(), false, false, EIG_EPS, EIG_MAX_ITER).ok_or(Error::EigenFailure)?;
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Sorted eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), EIG_EPS, EIG_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Smallest eigenvalue of the symmetric part; `+inf` for the empty matrix.
pub fn min_eigenvalue_sym(m: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

/// Largest eigenvalue of the symmetric part; `-inf` for the empty matrix.
pub fn max_eigenvalue_sym(m: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY))
}

pub(crate) fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    ensure_finite(m, "matrix")?;
    Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite)
}

/// `ln det M` of a symmetric positive-definite matrix via its Cholesky factor.
pub fn logdet_pd(m: &Matrix) -> Result<f64> {
    ensure_square(m, "matrix")?;
    let chol = cholesky(m)?;
    Ok(logdet_from_cholesky(&chol))
}

fn logdet_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves the Stein equation `X = A X A^T + Q` for stable `A`.
pub fn solve_stein(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_square(q, "Q")?;
    if a.nrows() != q.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(q, "Q")?;
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let solve = |rhs: &Matrix| -> Result<Matrix> {
        if n <= STEIN_VECTORIZE_MAX {
            stein_vectorized(a, rhs)
        } else {
            Ok(stein_doubling(a, rhs))
        }
    };
    let mut x = solve(q)?;
    // Residual correction: the defect satisfies the same equation.
    for _ in 0..3 {
        let defect = a * &x * a.transpose() + q - &x;
        if defect.norm() <= 1e-14 * (1.0 + x.norm()) {
            break;
        }
        x += solve(&defect)?;
    }
    Ok(x)
}

fn stein_vectorized(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    // Column-major vec: vec(A X A^T) = (A kron A) vec(X).
    let kron = a.kronecker(a);
    let lhs = Matrix::identity(n * n, n * n) - kron;
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or(Error::Unstable(1.0))?;
    Ok(Matrix::from_column_slice(n, n, sol.as_slice()))
}

fn stein_doubling(a: &Matrix, q: &Matrix) -> Matrix {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let inc = &ak * &x * ak.transpose();
        x += &inc;
        if inc.norm() <= f64::EPSILON * x.norm() {
            break;
        }
        ak = &ak * &ak;
    }
    x
}
