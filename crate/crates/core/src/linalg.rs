//! Small dense linear algebra: a column-major matrix, Cholesky, a Jacobi
//! symmetric eigensolver and least squares with a pseudo-inverse fallback.
//!
//! Problem sizes here are tiny (tens of columns), so nothing is blocked or
//! vectorized.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, sqrt};

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from equally long rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, p);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), p, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for c in cols {
            assert_eq!(c.len(), n, "ragged columns");
            data.extend_from_slice(c);
        }
        Matrix {
            rows: n,
            cols: p,
            data,
        }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `X v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (o, x) in out.iter_mut().zip(self.col(j)) {
                    *o += x * vj;
                }
            }
        }
        out
    }

    /// `X' v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// `X' X`
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for j in 0..p {
            for k in 0..=j {
                let v = dot(self.col(j), self.col(k));
                g.set(j, k, v);
                g.set(k, j, v);
            }
        }
        g
    }

    /// `X' diag(w) X`
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        assert_eq!(w.len(), self.rows);
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        let mut wx = vec![0.0; self.rows];
        for j in 0..p {
            for ((o, x), wi) in wx.iter_mut().zip(self.col(j)).zip(w) {
                *o = x * wi;
            }
            for k in 0..=j {
                let v = dot(&wx, self.col(k));
                g.set(j, k, v);
                g.set(k, j, v);
            }
        }
        g
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Matrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(idx.len(), self.cols);
        for j in 0..self.cols {
            let src = self.col(j);
            for (dst, &i) in m.col_mut(j).iter_mut().zip(idx) {
                *dst = src[i];
            }
        }
        m
    }

    /// Principal submatrix of a square matrix.
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        let k = idx.len();
        let mut m = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Multiplies every row `i` by `s[i]`.
    pub fn scale_rows(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.rows);
        for j in 0..self.cols {
            for (x, si) in self.col_mut(j).iter_mut().zip(s) {
                *x *= si;
            }
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Returns `None` when a pivot is not safely positive.
    pub fn new(a: &Matrix) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let scale = (0..n).fold(0.0_f64, |m, i| m.max(a.get(i, i).abs()));
        let floor = scale * 1e-13;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > floor) {
                return None;
            }
            let d = sqrt(d);
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Some(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        let total: f64 = (0..n).map(|i| m.get(i, i) * m.get(i, i)).sum::<f64>() + 2.0 * off;
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Solves `A x = b` for symmetric positive semidefinite `A`.
///
/// Uses Cholesky when it succeeds; otherwise falls back to the
/// Moore-Penrose pseudo-inverse and reports `true` in the second slot.
pub fn solve_psd(a: &Matrix, b: &[f64]) -> (Vec<f64>, bool) {
    if let Some(ch) = Cholesky::new(a) {
        return (ch.solve(b), false);
    }
    (pinv_solve(a, b), true)
}

/// `A^+ b` for symmetric `A`, discarding eigenvalues below a relative cutoff.
pub fn pinv_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = top * 1e-12 * n.max(1) as f64;
    let mut x = vec![0.0; n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cut || lam == 0.0 {
            continue;
        }
        let vk = vecs.col(k);
        let coef = dot(vk, b) / lam;
        for (xi, v) in x.iter_mut().zip(vk) {
            *xi += coef * v;
        }
    }
    x
}

/// Ordinary least squares through the normal equations; the flag reports a
/// rank-deficient design (pseudo-inverse solution returned).
pub fn least_squares(x: &Matrix, y: &[f64]) -> (Vec<f64>, bool) {
    let g = x.gram();
    let c = x.tr_mul_vec(y);
    solve_psd(&g, &c)
}
