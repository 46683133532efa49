//! Low-rank linear algebra for the marginalized posterior.
//!
//! For `u = A g + noise` with `A` an n x p operator (n << p) and a
//! regularizer gram matrix K = R'R, every quantity the posterior needs can be
//! pushed to the small side through
//!
//! ```text
//! B = I_n + alpha^{-1} A K^{-1} A'
//! ```
//!
//! factorized in the equivalent well-scaled form alpha I + A K^{-1} A'. The
//! factor yields both the log determinant term (equal to
//! log det(alpha^{-1} Ã'Ã + I_p) for the whitened operator Ã = A R^{-1}) and
//! the data-dependent quadratic u' B^{-1} u, which equals the penalized
//! least-squares energy `alpha <g_min, K g_min> + ||u - A g_min||^2` at the
//! regularized minimizer g_min. The p-dimensional side is touched only
//! through solves with K, which are cached banded (or dense) Cholesky
//! factorizations built once.

pub mod banded;
pub mod cg;
pub mod chol;

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1};

pub use banded::{BandedCholesky, BandedSpd};

/// Dense n x p forward operator.
#[derive(Clone, Debug)]
pub struct ForwardOperator {
    matrix: Array2<f64>,
}

impl ForwardOperator {
    /// Wraps a dense matrix; every entry must be finite.
    pub fn from_dense(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "ForwardOperator::from_dense",
                expected: 1,
                got: 0,
            });
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                detail: "forward operator has non-finite entries".into(),
            });
        }
        Ok(ForwardOperator { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// A g
    pub fn apply(&self, g: &ArrayView1<f64>) -> Array1<f64> {
        self.matrix.dot(g)
    }

    /// A' v
    pub fn apply_transpose(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        self.matrix.t().dot(v)
    }
}

/// The regularizer enters only through its gram matrix K = R'R, kept here
/// with a factorization cached at construction.
#[derive(Clone, Debug)]
pub enum RegularizerGram {
    Identity {
        p: usize,
    },
    Banded {
        matrix: BandedSpd,
        factor: BandedCholesky,
    },
    Dense {
        matrix: Array2<f64>,
        factor: Array2<f64>,
    },
}

impl RegularizerGram {
    pub fn identity(p: usize) -> Self {
        RegularizerGram::Identity { p }
    }

    pub fn banded(matrix: BandedSpd) -> Result<Self> {
        let factor = matrix.cholesky()?;
        Ok(RegularizerGram::Banded { matrix, factor })
    }

    pub fn dense(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "RegularizerGram::dense",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let factor = chol::cholesky_lower(&matrix.view())?;
        Ok(RegularizerGram::Dense { matrix, factor })
    }

    pub fn p(&self) -> usize {
        match self {
            RegularizerGram::Identity { p } => *p,
            RegularizerGram::Banded { matrix, .. } => matrix.p(),
            RegularizerGram::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, RegularizerGram::Identity { .. })
    }

    /// K g
    pub fn apply(&self, g: &ArrayView1<f64>) -> Array1<f64> {
        match self {
            RegularizerGram::Identity { .. } => g.to_owned(),
            RegularizerGram::Banded { matrix, .. } => matrix.matvec(g),
            RegularizerGram::Dense { matrix, .. } => matrix.dot(g),
        }
    }

    /// K^{-1} v using the cached factorization.
    pub fn solve(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        let mut x = v.to_owned();
        match self {
            RegularizerGram::Identity { .. } => {}
            RegularizerGram::Banded { factor, .. } => {
                factor.solve_in_place(x.as_slice_mut().expect("contiguous"));
            }
            RegularizerGram::Dense { factor, .. } => {
                let buf = x.as_slice_mut().expect("contiguous");
                chol::solve_lower_in_place(factor, buf);
                chol::solve_lower_transpose_in_place(factor, buf);
            }
        }
        x
    }

    /// log det K from the cached factor.
    pub fn logdet(&self) -> f64 {
        match self {
            RegularizerGram::Identity { .. } => 0.0,
            RegularizerGram::Banded { factor, .. } => factor.logdet(),
            RegularizerGram::Dense { factor, .. } => chol::logdet_from_factor(factor),
        }
    }

    /// L^{-1} x in place for K = L L' (a no-op for the identity gram).
    fn whiten_in_place(&self, x: &mut [f64]) {
        match self {
            RegularizerGram::Identity { .. } => {}
            RegularizerGram::Banded { factor, .. } => factor.forward_in_place(x),
            RegularizerGram::Dense { factor, .. } => chol::solve_lower_in_place(factor, x),
        }
    }
}

/// The alpha-independent core G = A K^{-1} A', reusable across many alpha
/// values for a fixed operator.
pub struct ReducedGram {
    g: Array2<f64>,
    n: usize,
}

impl ReducedGram {
    pub fn new(op: &ForwardOperator, gram: &RegularizerGram) -> Result<Self> {
        if gram.p() != op.p() {
            return Err(Error::DimensionMismatch {
                context: "ReducedGram::new",
                expected: op.p(),
                got: gram.p(),
            });
        }
        let n = op.n();
        let g = if gram.is_identity() {
            op.matrix().dot(&op.matrix().t())
        } else {
            // Rows of A are the columns of A'; whitening each one gives
            // V' = A L^{-T}... stored row-wise, so G = (V')(V')' = V'V.
            let mut vt = op.matrix().clone();
            for mut row in vt.rows_mut() {
                gram.whiten_in_place(row.as_slice_mut().expect("row-major"));
            }
            vt.dot(&vt.t())
        };
        Ok(ReducedGram { g, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Factorizes B = I + G / alpha through the equivalent well-scaled form
    /// alpha I + G, whose conditioning stays bounded by that of G as alpha
    /// shrinks. On a failed factorization a single diagonal jitter of
    /// 1e-12 * trace / n is applied before giving up.
    pub fn factor(&self, alpha: f64) -> Result<LowRankFactor> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                detail: format!("alpha must be positive and finite, got {alpha}"),
            });
        }
        let n = self.n;
        let mut c = self.g.clone();
        for i in 0..n {
            c[[i, i]] += alpha;
        }
        let chol_small = match chol::cholesky_lower(&c.view()) {
            Ok(l) => l,
            Err(_) => {
                let trace: f64 = (0..n).map(|i| c[[i, i]]).sum();
                let jitter = 1e-12 * trace / n as f64;
                for i in 0..n {
                    c[[i, i]] += jitter;
                }
                chol::cholesky_lower(&c.view())?
            }
        };
        let logdet_small = chol::logdet_from_factor(&chol_small) - n as f64 * alpha.ln();
        Ok(LowRankFactor {
            m: None,
            alpha,
            chol_small,
            logdet_small,
        })
    }
}

/// Factorization of B = I + alpha^{-1} A K^{-1} A', held as the Cholesky
/// factor of alpha I + G and optionally labeled with the nonlinear parameter
/// it was built at. Applications of B^{-1} rescale by alpha.
pub struct LowRankFactor {
    pub m: Option<Vec<f64>>,
    alpha: f64,
    chol_small: Array2<f64>,
    logdet_small: f64,
}

impl LowRankFactor {
    pub fn build(op: &ForwardOperator, gram: &RegularizerGram, alpha: f64) -> Result<Self> {
        ReducedGram::new(op, gram)?.factor(alpha)
    }

    pub fn n(&self) -> usize {
        self.chol_small.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn chol_small(&self) -> &Array2<f64> {
        &self.chol_small
    }

    /// log det B, equal to the p-dimensional determinant term of the
    /// marginalized posterior.
    pub fn logdet(&self) -> f64 {
        self.logdet_small
    }

    /// u' B^{-1} u computed as alpha ||L^{-1} u||^2, hence never negative.
    pub fn quadratic(&self, u: &ArrayView1<f64>) -> f64 {
        let mut y = u.to_owned();
        chol::solve_lower_in_place(&self.chol_small, y.as_slice_mut().expect("contiguous"));
        self.alpha * y.dot(&y)
    }

    /// B^{-1} u
    pub fn solve(&self, u: &ArrayView1<f64>) -> Array1<f64> {
        let mut y = u.to_owned();
        let buf = y.as_slice_mut().expect("contiguous");
        chol::solve_lower_in_place(&self.chol_small, buf);
        chol::solve_lower_transpose_in_place(&self.chol_small, buf);
        y * self.alpha
    }

    /// trace(B^{-1}) = alpha times the squared Frobenius norm of L^{-1}.
    pub fn trace_inverse(&self) -> f64 {
        let n = self.n();
        let l = &self.chol_small;
        let mut total = 0.0;
        let mut col = vec![0.0f64; n];
        for j in 0..n {
            // Column j of L^{-1} has support j..n; solve L y = e_j on it.
            col[j] = 1.0 / l[[j, j]];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[[i, k]] * col[k];
                }
                col[i] = s / l[[i, i]];
            }
            for &v in &col[j..n] {
                total += v * v;
            }
        }
        self.alpha * total
    }
}

/// (A'A + alpha K) g, the normal-equations operator of the penalized
/// least-squares problem, fused for the iterative solver.
pub fn apply_normal_operator(
    op: &ForwardOperator,
    gram: &RegularizerGram,
    alpha: f64,
    g: &ArrayView1<f64>,
) -> Array1<f64> {
    let ag = op.apply(g);
    let mut out = op.apply_transpose(&ag.view());
    let kg = gram.apply(g);
    out.scaled_add(alpha, &kg);
    out
}

/// Regularized least-squares solution g_min = (A'A + alpha K)^{-1} A'u by
/// conjugate gradients, preconditioned with the cached gram factorization.
/// Relative residual tolerance 1e-10, iteration cap 50 p.
pub fn solve_regularized(
    op: &ForwardOperator,
    gram: &RegularizerGram,
    alpha: f64,
    u: &ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if u.len() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "solve_regularized",
            expected: op.n(),
            got: u.len(),
        });
    }
    if gram.p() != op.p() {
        return Err(Error::DimensionMismatch {
            context: "solve_regularized",
            expected: op.p(),
            got: gram.p(),
        });
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            detail: format!("alpha must be positive and finite, got {alpha}"),
        });
    }
    let b = op.apply_transpose(u);
    let out = cg::pcg(
        |g| apply_normal_operator(op, gram, alpha, g),
        |r| gram.solve(r) / alpha,
        &b.view(),
        1e-10,
        50 * op.p(),
    )?;
    Ok(out.x)
}

/// u' B^{-1} u, the sigma-profiled misfit `alpha <g_min, K g_min> +
/// ||u - A g_min||^2` evaluated without forming g_min.
pub fn misfit_quadratic(
    op: &ForwardOperator,
    gram: &RegularizerGram,
    alpha: f64,
    u: &ArrayView1<f64>,
) -> Result<f64> {
    if u.len() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "misfit_quadratic",
            expected: op.n(),
            got: u.len(),
        });
    }
    Ok(LowRankFactor::build(op, gram, alpha)?.quadratic(u))
}

/// log det(alpha^{-1} Ã'Ã + I_p) for the whitened operator, computed on the
/// n x n side.
pub fn logdet_term(op: &ForwardOperator, gram: &RegularizerGram, alpha: f64) -> Result<f64> {
    Ok(LowRankFactor::build(op, gram, alpha)?.logdet())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn scalar_instance_closed_forms() {
        // A = [1], R = I, alpha = 2, u = 3:
        // B = 3/2, logdet = ln 1.5, u'B^{-1}u = 6, g_min = 1.
        let op = ForwardOperator::from_dense(array![[1.0]]).unwrap();
        let gram = RegularizerGram::identity(1);
        let u = array![3.0];
        let f = LowRankFactor::build(&op, &gram, 2.0).unwrap();
        assert!((f.logdet() - 1.5f64.ln()).abs() < 1e-15);
        assert!((f.quadratic(&u.view()) - 6.0).abs() < 1e-12);
        let g = solve_regularized(&op, &gram, 2.0, &u.view()).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_operator_halves_data() {
        // A = I_3, alpha = 1: g_min = u / 2.
        let op = ForwardOperator::from_dense(Array2::eye(3)).unwrap();
        let gram = RegularizerGram::identity(3);
        let u = array![1.0, -2.0, 0.5];
        let g = solve_regularized(&op, &gram, 1.0, &u.view()).unwrap();
        for i in 0..3 {
            assert!((g[i] - u[i] / 2.0).abs() < 1e-10);
        }
        let n = apply_normal_operator(&op, &gram, 1.0, &u.view());
        for i in 0..3 {
            assert!((n[i] - 2.0 * u[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution_and_zero_misfit() {
        let op = ForwardOperator::from_dense(array![[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]]).unwrap();
        let gram = RegularizerGram::identity(3);
        let u = array![0.0, 0.0];
        let g = solve_regularized(&op, &gram, 0.5, &u.view()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert_eq!(misfit_quadratic(&op, &gram, 0.5, &u.view()).unwrap(), 0.0);
    }

    #[test]
    fn zero_operator_keeps_b_identity() {
        let op = ForwardOperator::from_dense(Array2::zeros((2, 5))).unwrap();
        let gram = RegularizerGram::identity(5);
        let u = array![3.0, 4.0];
        let f = LowRankFactor::build(&op, &gram, 0.7).unwrap();
        assert!(f.logdet().abs() < 1e-12);
        assert!((f.quadratic(&u.view()) - 25.0).abs() < 1e-12);
        assert!((f.trace_inverse() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_rows_give_n_log_two() {
        // A A' = I_2 at alpha = 1 makes det B = 2^n.
        let op =
            ForwardOperator::from_dense(array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let gram = RegularizerGram::identity(3);
        let ld = logdet_term(&op, &gram, 1.0).unwrap();
        assert!((ld - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors_are_reported() {
        let op = ForwardOperator::from_dense(array![[1.0, 2.0]]).unwrap();
        let gram = RegularizerGram::identity(3);
        let u = array![1.0];
        assert!(matches!(
            solve_regularized(&op, &gram, 1.0, &u.view()),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_alpha = LowRankFactor::build(
            &op,
            &RegularizerGram::identity(2),
            -1.0,
        );
        assert!(matches!(bad_alpha, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn non_finite_operator_rejected() {
        assert!(ForwardOperator::from_dense(array![[f64::NAN]]).is_err());
    }
}
