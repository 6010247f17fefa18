use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solve `A x = b` for symmetric positive definite `A`.
///
/// Fails with [`Error::Singular`] when the Cholesky factorization breaks
/// down or a pivot is negligible relative to the largest one.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let dim = a.nrows();
    let chol = a.cholesky().ok_or(Error::Singular { dim })?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..dim).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || min / max < 1e-7 {
        return Err(Error::Singular { dim });
    }
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub(crate) fn sym_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
