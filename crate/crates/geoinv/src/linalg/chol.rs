//! Dense Cholesky kernels for the small n x n systems.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

/// Lower Cholesky factor of a symmetric positive definite matrix. Only the
/// lower triangle of the input is read. Fails on a nonpositive pivot.
pub fn cholesky_lower(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "cholesky_lower",
            expected: n,
            got: a.ncols(),
        });
    }
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::FactorizationFailure {
                context: "cholesky_lower",
            });
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Semidefinite-tolerant lower factor for proposal covariances: pivots at or
/// below a relative floor zero out their column, so degenerate directions map
/// to exactly zero proposal components.
pub fn psd_factor_lower(a: &ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "psd_factor_lower: square input");
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0f64, f64::max);
    let floor = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= floor {
            continue; // leave column j at zero
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    l
}

/// Solves L x = b in place (forward substitution).
pub fn solve_lower_in_place(l: &Array2<f64>, x: &mut [f64]) {
    let n = l.nrows();
    debug_assert_eq!(x.len(), n);
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
}

/// Solves L' x = b in place (back substitution against the lower factor).
pub fn solve_lower_transpose_in_place(l: &Array2<f64>, x: &mut [f64]) {
    let n = l.nrows();
    debug_assert_eq!(x.len(), n);
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
}

/// log det(A) = 2 sum log L_ii for A = L L'.
pub fn logdet_from_factor(l: &Array2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0
}
