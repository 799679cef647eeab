//! Dense matrix primitives: the matrix norms used throughout the crate, the
//! banding operator, spectral quantities and linear solves.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense real matrix in row-major storage.
///
/// Invariants: `data.len() == rows * cols`, both dimensions nonzero, and all
/// entries finite. Banded matrices are stored dense; bandwidth is metadata
/// kept by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {x}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self' * v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max{norm_one, norm_inf}`.
    pub fn norm_one_inf(&self) -> f64 {
        self.norm_one().max(self.norm_inf())
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest singular value by power iteration on `self' * self`.
    ///
    /// Deterministic all-ones start vector. Defaults elsewhere in the crate:
    /// `tol = 1e-10`, `max_iter = 10_000`.
    pub fn spectral_norm(&self, tol: f64, max_iter: usize) -> Result<f64> {
        if tol <= 0.0 {
            return Err(Error::InvalidArgument("spectral_norm tol must be > 0".into()));
        }
        let n = self.cols;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut sigma = 0.0_f64;
        for _ in 0..max_iter {
            let w = self.tr_matvec(&self.matvec(&v));
            let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm_w == 0.0 {
                return Ok(0.0);
            }
            let next = norm_w.sqrt();
            let done = (next - sigma).abs() <= tol * next.max(1.0);
            sigma = next;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm_w;
            }
            if done {
                return Ok(sigma);
            }
        }
        Err(Error::NoConvergence {
            iters: max_iter,
            last: sigma,
        })
    }

    pub fn spectral_norm_default(&self) -> Result<f64> {
        self.spectral_norm(1e-10, 10_000)
    }

    /// The h-banding operator: entry (i,j) kept iff `|i-j| <= h`.
    pub fn band(&self, h: usize) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| {
            if i.abs_diff(j) <= h {
                self.get(i, j)
            } else {
                0.0
            }
        })
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Mat) -> Result<Self> {
        assert!(a.is_square());
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, piv_val) = (k..n)
                .map(|i| (i, lu.get(i, k).abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if piv_val == 0.0 {
                return Err(Error::IllConditioned { cond: f64::INFINITY });
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(piv, j));
                    lu.set(piv, j, tmp);
                }
                perm.swap(k, piv);
            }
            let pivot = lu.get(k, k);
            for i in k + 1..n {
                let m = lu.get(i, k) / pivot;
                lu.set(i, k, m);
                for j in k + 1..n {
                    let v = lu.get(i, j) - m * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu.get(i, j) * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu.get(i, j) * x[j];
            }
            x[i] /= self.lu.get(i, i);
        }
        x
    }

    /// Solve `A' x = b` using the same factorization.
    fn solve_transpose_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        // A' = U' L' P, so forward-substitute U', back-substitute L', unpermute.
        let mut y = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu.get(j, i) * y[j];
            }
            y[i] /= self.lu.get(i, i);
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu.get(j, i) * y[j];
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Hager's estimator for `norm_one(A^{-1})`.
    fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.lu.rows();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0_f64;
        for _ in 0..5 {
            let y = self.solve_vec(&x);
            let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose_vec(&xi);
            let (jmax, z_inf) = z
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            est = est.max(y_norm);
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if z_inf <= zx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est
    }
}

/// Solve `a x = b` by LU with partial pivoting.
///
/// Errors when `a` is singular or the 1-norm condition estimate exceeds 1e12.
pub fn solve_linear(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Dimension("solve_linear requires a square matrix".into()));
    }
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "solve_linear: lhs is {}x{}, rhs has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let lu = Lu::factor(a)?;
    let cond = a.norm_one() * lu.inverse_norm_one_estimate();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditioned { cond });
    }
    let mut out = Mat::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let col: Vec<f64> = (0..b.rows()).map(|i| b.get(i, j)).collect();
        let x = lu.solve_vec(&col);
        for (i, v) in x.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Cholesky factor L with `L L' = a` for symmetric positive definite `a`.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Dimension("cholesky requires a square matrix".into()));
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "matrix is not positive definite".into(),
                    ));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns (eigenvalues, eigenvectors-as-columns), unsorted.
pub fn sym_eigen(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !a.is_square() {
        return Err(Error::Dimension("sym_eigen requires a square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= 1e-14 * m.norm_frobenius().max(1.0) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
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
    let eigvals = (0..n).map(|i| m.get(i, i)).collect();
    Ok((eigvals, v))
}

/// Minimum-norm least-squares solve of `x'x c = x'y` via eigendecomposition of
/// the (symmetric) normal matrix. Returns the solution and whether a
/// rank-deficiency fallback was taken.
pub fn pinv_solve_normal(xtx: &Mat, xty: &[f64]) -> Result<(Vec<f64>, bool)> {
    let (vals, vecs) = sym_eigen(xtx)?;
    let vmax = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = vmax * 1e-12;
    let mut rank_deficient = false;
    let n = xty.len();
    let mut c = vec![0.0; n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cut {
            rank_deficient = true;
            continue;
        }
        let uk = vecs.col(k);
        let proj: f64 = uk.iter().zip(xty).map(|(a, b)| a * b).sum();
        for (ci, ui) in c.iter_mut().zip(&uk) {
            *ci += proj / lam * ui;
        }
    }
    Ok((c, rank_deficient))
}
