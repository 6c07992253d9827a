//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff below which eigenvalues count as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve_dense(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Dimension("singular linear system".into()))
}

/// Minimum-norm solution `A^+ b` of a symmetric positive semidefinite system,
/// discarding eigenvalues below `PINV_CUTOFF * max |eigenvalue|`.
pub fn pinv_solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let cutoff = PINV_CUTOFF * top;
    let mut out = DVector::zeros(b.len());
    if top == 0.0 {
        return out;
    }
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e.abs() > cutoff {
            let u = eig.eigenvectors.column(i);
            out.axpy(u.dot(b) / e, &u, 1.0);
        }
    }
    out
}

/// Smallest eigenvalue of a symmetric PSD matrix restricted to its range
/// (eigenvalues above the pseudoinverse cutoff). `None` for the zero matrix.
pub fn min_range_eigenvalue(a: &DMatrix<f64>) -> Option<f64> {
    let eig = a.clone().symmetric_eigenvalues();
    let top = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if top == 0.0 {
        return None;
    }
    eig.iter()
        .copied()
        .filter(|&e| e > PINV_CUTOFF * top)
        .reduce(f64::min)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().min()
}

/// Projector onto the range of a symmetric PSD matrix.
pub fn range_projector(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let n = a.nrows();
    let mut proj = DMatrix::zeros(n, n);
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if top > 0.0 && e.abs() > PINV_CUTOFF * top {
            let u = eig.eigenvectors.column(i).into_owned();
            proj.ger(1.0, &u, &u, 1.0);
        }
    }
    proj
}
