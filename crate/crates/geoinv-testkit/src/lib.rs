//! Reference routines for the test suites.
//!
//! Everything in this crate favors literal, textbook formulations over speed:
//! dense LU with partial pivoting, cyclic Jacobi eigenvalues, trapezoid
//! weights, empirical-distribution distances. The main library never depends
//! on this crate; tests use it to cross-check the fast low-rank paths against
//! independent dense computations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed-seed RNG for reproducible test instances.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense matrix with independent uniform entries in [-scale, scale].
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
}

/// Random symmetric positive definite matrix C'C/p + ridge I.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize, ridge: f64) -> Array2<f64> {
    let c = random_matrix(rng, p, p, 1.0);
    let mut k = c.t().dot(&c) / p as f64;
    for i in 0..p {
        k[[i, i]] += ridge;
    }
    // Symmetrize exactly so downstream factorizations see a symmetric input.
    let kt = k.t().to_owned();
    (&k + &kt) / 2.0
}

/// LU factorization with partial pivoting (Doolittle, row swaps).
pub struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &ArrayView2<f64>) -> Result<Lu, String> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(format!("lu: matrix is {}x{}, not square", n, a.ncols()));
        }
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu[[col, col]].abs();
            for row in col + 1..n {
                let v = lu[[row, col]].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = row;
                }
            }
            if pivot_val == 0.0 {
                return Err(format!("lu: singular at column {col}"));
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu[[col, j]];
                    lu[[col, j]] = lu[[pivot_row, j]];
                    lu[[pivot_row, j]] = tmp;
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            let d = lu[[col, col]];
            for row in col + 1..n {
                let f = lu[[row, col]] / d;
                lu[[row, col]] = f;
                for j in col + 1..n {
                    lu[[row, j]] -= f * lu[[col, j]];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve_vec(&self, b: &ArrayView1<f64>) -> Array1<f64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n, "lu solve: rhs length");
        let mut x = Array1::zeros(n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            for j in 0..i {
                let f = self.lu[[i, j]] * x[j];
                x[i] -= f;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let f = self.lu[[i, j]] * x[j];
                x[i] -= f;
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }

    pub fn solve_mat(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.lu.nrows(), b.ncols()));
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(&col));
        }
        out
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.lu.nrows();
        self.solve_mat(&Array2::eye(n).view())
    }

    /// Returns (sign, log |det|).
    pub fn logabsdet(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut logdet = 0.0;
        for i in 0..self.lu.nrows() {
            let d = self.lu[[i, i]];
            if d < 0.0 {
                sign = -sign;
            }
            logdet += d.abs().ln();
        }
        (sign, logdet)
    }
}

/// Solves a x = b densely, panicking on singular input (test convenience).
pub fn solve_dense(a: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    Lu::factor(a).expect("dense solve").solve_vec(b)
}

/// Dense inverse, panicking on singular input.
pub fn invert_dense(a: &ArrayView2<f64>) -> Array2<f64> {
    Lu::factor(a).expect("dense inverse").inverse()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &ArrayView2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi: square input");
    let mut m = a.to_owned();
    let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// log det of a symmetric positive definite matrix via Jacobi eigenvalues.
pub fn sym_logdet(a: &ArrayView2<f64>) -> f64 {
    sym_eigenvalues(a).iter().map(|v| v.ln()).sum()
}

/// Composite trapezoid weights for `len` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(len: usize, h: f64) -> Vec<f64> {
    assert!(len >= 2, "trapezoid needs at least two nodes");
    let mut w = vec![h; len];
    w[0] = h / 2.0;
    w[len - 1] = h / 2.0;
    w
}

/// Total variation distance between two discrete distributions on shared bins.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "tv: bin counts differ");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Bin masses over [lo, hi], normalized to sum to one. Samples outside the
/// range are clamped into the boundary bins.
pub fn histogram_masses(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    assert!(bins >= 1 && hi > lo && !samples.is_empty());
    let mut mass = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    for &x in samples {
        let idx = (((x - lo) / w).floor() as isize).clamp(0, bins as isize - 1) as usize;
        mass[idx] += 1.0;
    }
    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    mass
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    d
}

/// Asymptotic two-sample KS p-value (Kolmogorov distribution tail).
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
