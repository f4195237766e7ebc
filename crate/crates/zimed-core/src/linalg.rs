//! Small dense matrix helpers for the information matrix and the closed-form
//! pieces of initialization. Everything here targets matrices on the order of
//! a dozen rows, so simple O(n³) routines are plenty.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Largest absolute asymmetry |A - Aᵀ|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Force exact symmetry by averaging off-diagonal pairs.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Cholesky factor L (lower triangular, A = LLᵀ) of a symmetric matrix, or
/// `None` if the matrix is not numerically positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = sqrt(d);
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solve A x = b given the Cholesky factor L of A.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Inverse of a positive definite matrix through its Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.n_rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        e[j] = 0.0;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv.symmetrize();
    inv
}

/// Eigenvalues and eigenvectors of a symmetric matrix by the cyclic Jacobi
/// method. Returns `(eigenvalues, V)` with columns of `V` the eigenvectors,
/// so `A = V diag(λ) Vᵀ`.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.n_rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[(i, i)]).collect();
    (eig, v)
}

/// Moore-Penrose style pseudo-inverse of a symmetric matrix with eigenvalues
/// below `rel_tol · max λ` treated as zero. The second value reports whether
/// any eigenvalue had to be discarded or was negative, meaning the input was
/// singular or indefinite and the result is only positive semi-definite.
pub fn pseudo_inverse_psd(a: &Matrix, rel_tol: f64) -> (Matrix, bool) {
    let n = a.n_rows();
    let (eig, v) = jacobi_eigen(a);
    let max_eig = eig.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let cutoff = rel_tol * max_eig;
    let mut clamped = false;
    let inv_eig: Vec<f64> = eig
        .iter()
        .map(|&e| {
            if e > cutoff {
                1.0 / e
            } else {
                clamped = true;
                0.0
            }
        })
        .collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (k, &ie) in inv_eig.iter().enumerate() {
                s += v[(i, k)] * ie * v[(j, k)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    (out, clamped)
}

/// Ordinary least squares through the normal equations, with a progressive
/// ridge fallback when XᵀX is numerically singular. Returns the coefficient
/// vector; rows of `x` are observations.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let p = x.n_cols();
    let mut xtx = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    for i in 0..x.n_rows() {
        let row = x.row(i);
        for a in 0..p {
            xty[a] += row[a] * y[i];
            for b in a..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let mut ridge = 0.0;
    let scale = (0..p).map(|i| xtx[(i, i)]).fold(0.0f64, f64::max).max(1e-12);
    loop {
        let mut work = xtx.clone();
        for i in 0..p {
            work[(i, i)] += ridge;
        }
        if let Some(l) = cholesky(&work) {
            return cholesky_solve(&l, &xty);
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
        assert!(ridge < scale * 1e3, "least squares failed to regularize");
    }
}
