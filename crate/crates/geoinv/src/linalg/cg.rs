//! Preconditioned conjugate gradients on a matrix-free SPD operator.

use crate::error::{Error, Result};
use ndarray::{Array1, ArrayView1};

pub struct CgOutcome {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `apply(x) = b` for an SPD operator, stopping when the true residual
/// norm drops below `tol * ||b||`. `precond` applies an SPD approximate
/// inverse of the operator.
pub fn pcg<F, M>(
    apply: F,
    precond: M,
    b: &ArrayView1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(&ArrayView1<f64>) -> Array1<f64>,
    M: Fn(&ArrayView1<f64>) -> Array1<f64>,
{
    let n = b.len();
    let b_norm = b.dot(b).sqrt();
    let mut x = Array1::zeros(n);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_owned();
    let mut z = precond(&r.view());
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for iter in 1..=max_iter {
        let ap = apply(&p.view());
        let pap = p.dot(&ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r.dot(&r).sqrt() / b_norm,
            });
        }
        let alpha = rz / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let res = r.dot(&r).sqrt();
        if res <= tol * b_norm {
            return Ok(CgOutcome {
                x,
                iterations: iter,
                relative_residual: res / b_norm,
            });
        }
        z = precond(&r.view());
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &(&p * beta);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: r.dot(&r).sqrt() / b_norm,
    })
}
