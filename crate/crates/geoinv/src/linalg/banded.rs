//! Symmetric banded storage for the regularizer gram matrix R'R.
//!
//! A lattice regularizer couples each node to its neighbors along the two
//! grid directions, so R'R has half-bandwidth equal to the grid side length.
//! The Cholesky factor stays inside the band, which makes the p-dimensional
//! solves needed by the low-rank reduction cheap: O(p * bandwidth) per
//! right-hand side after an O(p * bandwidth^2) factorization done once.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1};

/// Lower band of a symmetric matrix: `bands[[d, j]] = A[j + d, j]`.
#[derive(Clone, Debug)]
pub struct BandedSpd {
    p: usize,
    bw: usize,
    bands: Array2<f64>,
}

impl BandedSpd {
    pub fn zeros(p: usize, bw: usize) -> Self {
        assert!(p >= 1 && bw < p, "banded: need 1 <= bw + 1 <= p");
        BandedSpd {
            p,
            bw,
            bands: Array2::zeros((bw + 1, p)),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` to the (i, j) entry and, off the diagonal, to (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.bw, "banded: entry outside the band");
        self.bands[[hi - lo, lo]] += v;
    }

    pub fn matvec(&self, x: &ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.p, "banded matvec: length");
        let mut y = Array1::zeros(self.p);
        for j in 0..self.p {
            y[j] += self.bands[[0, j]] * x[j];
            let top = (self.p - 1 - j).min(self.bw);
            for d in 1..=top {
                let v = self.bands[[d, j]];
                y[j + d] += v * x[j];
                y[j] += v * x[j + d];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.p, self.p));
        for j in 0..self.p {
            a[[j, j]] = self.bands[[0, j]];
            let top = (self.p - 1 - j).min(self.bw);
            for d in 1..=top {
                a[[j + d, j]] = self.bands[[d, j]];
                a[[j, j + d]] = self.bands[[d, j]];
            }
        }
        a
    }

    /// In-band Cholesky factorization A = L L'.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (p, bw) = (self.p, self.bw);
        let mut l = Array2::zeros((bw + 1, p));
        for j in 0..p {
            let mut d = self.bands[[0, j]];
            let kmin = j.saturating_sub(bw);
            for k in kmin..j {
                let v = l[[j - k, k]];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::FactorizationFailure {
                    context: "banded cholesky",
                });
            }
            let ljj = d.sqrt();
            l[[0, j]] = ljj;
            let imax = (j + bw).min(p - 1);
            for i in j + 1..=imax {
                let mut s = self.bands[[i - j, j]];
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    s -= l[[i - k, k]] * l[[j - k, k]];
                }
                l[[i - j, j]] = s / ljj;
            }
        }
        Ok(BandedCholesky { p, bw, bands: l })
    }
}

/// Banded lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    p: usize,
    bw: usize,
    bands: Array2<f64>,
}

impl BandedCholesky {
    pub fn p(&self) -> usize {
        self.p
    }

    /// L y = b in place.
    pub fn forward_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.p);
        for i in 0..self.p {
            let kmin = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in kmin..i {
                s -= self.bands[[i - k, k]] * x[k];
            }
            x[i] = s / self.bands[[0, i]];
        }
    }

    /// L' x = y in place.
    pub fn backward_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.p);
        for i in (0..self.p).rev() {
            let kmax = (i + self.bw).min(self.p - 1);
            let mut s = x[i];
            for k in i + 1..=kmax {
                s -= self.bands[[k - i, i]] * x[k];
            }
            x[i] = s / self.bands[[0, i]];
        }
    }

    /// Full solve (L L')^{-1} b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.forward_in_place(x);
        self.backward_in_place(x);
    }

    /// log det(L L') = 2 sum ln L_ii.
    pub fn logdet(&self) -> f64 {
        (0..self.p).map(|i| 2.0 * self.bands[[0, i]].ln()).sum()
    }
}
