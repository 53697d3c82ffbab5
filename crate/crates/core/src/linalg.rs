//! Small dense least-squares helpers shared by the regression-based fitters.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on |R_ii| / max|R_jj| below which a column is treated
/// as linearly dependent.
const RANK_TOL: f64 = 1e-12;

/// Solves `min ||A x - b||` by Householder QR.
///
/// Returns `None` when `A` has fewer rows than columns or is numerically rank
/// deficient.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Some(DVector::zeros(0));
    }
    if rows < cols {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(max_diag > 0.0) || (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let x = r.solve_upper_triangular(&qtb)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}
