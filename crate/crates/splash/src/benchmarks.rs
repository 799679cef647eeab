//! Comparison estimators: generalized Yule-Walker least squares on a fixed
//! support (GMWY), the L1-penalized reduced-form VAR, and the constant-mean
//! forecaster.
//!
//! GMWY deliberately uses *unbanded* sample autocovariances while the
//! penalized estimator uses banded ones; the asymmetry is part of the
//! benchmark definitions, not an oversight.

use crate::autocov::{unbanded_autocov, AcovPair};
use crate::error::{Error, Result};
use crate::linalg::{pinv_solve_normal, solve_linear, Mat};
use crate::simulate::Panel;
use crate::yule_walker::CoeffMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Set of coefficient entries an estimator is allowed to use.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SupportSet {
    entries: BTreeSet<(CoeffMatrix, usize, usize)>,
}

impl SupportSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, matrix: CoeffMatrix, i: usize, j: usize) -> Result<()> {
        if matrix == CoeffMatrix::A && i == j {
            return Err(Error::InvalidArgument(
                "diagonal A entries are excluded by construction".into(),
            ));
        }
        self.entries.insert((matrix, i, j));
        Ok(())
    }

    pub fn contains(&self, matrix: CoeffMatrix, i: usize, j: usize) -> bool {
        self.entries.contains(&(matrix, i, j))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries of both matrices within bandwidth `k0` (A diagonal
    /// excluded).
    pub fn band(n: usize, k0: usize) -> Self {
        let mut s = Self::new();
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) <= k0 {
                    if i != j {
                        s.entries.insert((CoeffMatrix::A, i, j));
                    }
                    s.entries.insert((CoeffMatrix::B, i, j));
                }
            }
        }
        s
    }

    /// The nonzero pattern of a concrete pair of coefficient matrices.
    pub fn from_matrices(a: &Mat, b: &Mat) -> Self {
        let mut s = Self::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if i != j && a.get(i, j) != 0.0 {
                    s.entries.insert((CoeffMatrix::A, i, j));
                }
                if b.get(i, j) != 0.0 {
                    s.entries.insert((CoeffMatrix::B, i, j));
                }
            }
        }
        s
    }

    /// Supported columns of equation `i`, A entries first, then B, each by
    /// ascending column index.
    pub fn equation_columns(&self, i: usize, n: usize) -> Vec<(CoeffMatrix, usize)> {
        let mut out = Vec::new();
        for j in 0..n {
            if self.contains(CoeffMatrix::A, i, j) {
                out.push((CoeffMatrix::A, j));
            }
        }
        for j in 0..n {
            if self.contains(CoeffMatrix::B, i, j) {
                out.push((CoeffMatrix::B, j));
            }
        }
        out
    }
}

/// A GMWY fit with its rank-deficiency diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmwyFit {
    pub a_hat: Mat,
    pub b_hat: Mat,
    /// True when any equation's normal matrix was rank-deficient and the
    /// minimum-norm solution was used instead.
    pub rank_deficient: bool,
}

/// Per-equation least squares on given autocovariances, restricted to the
/// supported columns.
pub fn gmwy_fit_cov(acov: &AcovPair, support: &SupportSet) -> Result<GmwyFit> {
    let n = acov.sigma0.rows();
    if acov.sigma1.rows() != n || acov.sigma1.cols() != n || acov.sigma0.cols() != n {
        return Err(Error::Dimension("autocovariance matrices must be N x N".into()));
    }
    let mut a_hat = Mat::zeros(n, n);
    let mut b_hat = Mat::zeros(n, n);
    let mut rank_deficient = false;
    for i in 0..n {
        let cols = support.equation_columns(i, n);
        if cols.is_empty() {
            continue;
        }
        if cols.len() > n {
            return Err(Error::InvalidArgument(format!(
                "equation {i} has {} supported columns, more than the {n} moment conditions",
                cols.len()
            )));
        }
        let v = Mat::from_fn(n, cols.len(), |r, k| match cols[k] {
            (CoeffMatrix::A, j) => acov.sigma1.get(j, r),
            (CoeffMatrix::B, j) => acov.sigma0.get(r, j),
        });
        let target: Vec<f64> = (0..n).map(|r| acov.sigma1.get(i, r)).collect();
        let xtx = v.transpose().matmul(&v);
        let xty = v.tr_matvec(&target);
        let (sol, deficient) = pinv_solve_normal(&xtx, &xty)?;
        rank_deficient |= deficient;
        for (k, &(m, j)) in cols.iter().enumerate() {
            match m {
                CoeffMatrix::A => a_hat.set(i, j, sol[k]),
                CoeffMatrix::B => b_hat.set(i, j, sol[k]),
            }
        }
    }
    Ok(GmwyFit { a_hat, b_hat, rank_deficient })
}

/// GMWY on a panel: unbanded sample autocovariances, then per-equation least
/// squares on the support.
pub fn gmwy_fit(p: &Panel, support: &SupportSet) -> Result<GmwyFit> {
    gmwy_fit_cov(&unbanded_autocov(p)?, support)
}

/// L1-penalized reduced-form VAR: minimize
/// `sum_t ||y_t - C y_{t-1}||^2 + lambda * sum_ij |c_ij|`
/// by coordinate descent, row by row (the loss is row-separable).
pub fn pvar_fit(p: &Panel, lambda: f64, tol: f64, max_iter: usize) -> Result<Mat> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let n = p.n_units();
    let t = p.n_time();
    if t < 2 {
        return Err(Error::InvalidArgument("need at least 2 time points".into()));
    }
    // Gram of lagged regressors and cross moments, shared by all rows
    let mut gram = Mat::zeros(n, n);
    let mut cross = Mat::zeros(n, n); // cross[i][j] = sum_t y_{t,i} y_{t-1,j}
    for s in 1..t {
        let y = p.at(s);
        let x = p.at(s - 1);
        for i in 0..n {
            for j in 0..n {
                gram.set(i, j, gram.get(i, j) + x[i] * x[j]);
                cross.set(i, j, cross.get(i, j) + y[i] * x[j]);
            }
        }
    }
    let mut c = Mat::zeros(n, n);
    for i in 0..n {
        // lasso coordinate descent for row i
        let b: Vec<f64> = (0..n).map(|j| cross.get(i, j)).collect();
        let mut row = vec![0.0; n];
        let mut converged = false;
        for _ in 0..max_iter {
            let mut max_change = 0.0_f64;
            for j in 0..n {
                let gjj = gram.get(j, j);
                if gjj <= 0.0 {
                    continue;
                }
                let mut partial = b[j];
                for k in 0..n {
                    if k != j {
                        partial -= gram.get(j, k) * row[k];
                    }
                }
                let new = soft(partial, lambda / 2.0) / gjj;
                max_change = max_change.max((new - row[j]).abs());
                row[j] = new;
            }
            if max_change <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                iters: max_iter,
                last: row.iter().fold(0.0, |a, &x| a.max(x.abs())),
            });
        }
        for j in 0..n {
            c.set(i, j, row[j]);
        }
    }
    Ok(c)
}

fn soft(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}

/// Per-unit time mean of the window.
pub fn const_forecast(p: &Panel) -> Vec<f64> {
    let n = p.n_units();
    let t = p.n_time();
    (0..n)
        .map(|i| (0..t).map(|s| p.values.get(i, s)).sum::<f64>() / t as f64)
        .collect()
}

/// One-step forecast `(I - A_hat)^{-1} B_hat y_last` from a structural fit.
pub fn forecast_one_step(a_hat: &Mat, b_hat: &Mat, y_last: &[f64]) -> Result<Vec<f64>> {
    let n = a_hat.rows();
    if y_last.len() != n || b_hat.rows() != n {
        return Err(Error::Dimension("forecast input dimensions disagree".into()));
    }
    let rhs = b_hat.matvec(y_last);
    let i_minus_a = Mat::identity(n).sub(a_hat);
    let rhs_mat = Mat::new(n, 1, rhs)?;
    let sol = solve_linear(&i_minus_a, &rhs_mat)?;
    Ok(sol.col(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{population_autocov, reduced_form, StModel};
    use crate::simulate::{simulate_var, RngSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn interior_model(n: usize, cap: usize, seed: u64) -> StModel {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let interior = 2..n - 2;
        let a = Mat::from_fn(n, n, |i, j| {
            if i != j
                && i.abs_diff(j) <= cap
                && interior.contains(&i)
                && interior.contains(&j)
            {
                rng.gen_range(-0.3..0.3)
            } else {
                0.0
            }
        });
        let b = Mat::from_fn(n, n, |i, j| {
            if !interior.contains(&i) || i.abs_diff(j) > cap {
                0.0
            } else if i == j {
                0.45
            } else {
                rng.gen_range(-0.2..0.2)
            }
        });
        StModel::new(a, b, Mat::identity(n), cap, 0).unwrap()
    }

    #[test]
    fn gmwy_population_exact_on_true_support() {
        let m = interior_model(7, 1, 5);
        let rf = reduced_form(&m).unwrap();
        let sigma0 = population_autocov(&rf, &m.sigma_eps, 0, 1e-14).unwrap();
        let sigma1 = population_autocov(&rf, &m.sigma_eps, 1, 1e-14).unwrap();
        let support = SupportSet::from_matrices(&m.a, &m.b);
        let fit = gmwy_fit_cov(&AcovPair { sigma0, sigma1, h: None }, &support).unwrap();
        assert!(fit.a_hat.sub(&m.a).norm_max() < 1e-8);
        assert!(fit.b_hat.sub(&m.b).norm_max() < 1e-8);
    }

    #[test]
    fn gmwy_empty_equation_rows_are_zero() {
        let m = interior_model(7, 1, 3);
        let p = simulate_var(&m, 300, 100, RngSpec::new(1, 0)).unwrap();
        let mut support = SupportSet::new();
        support.insert(CoeffMatrix::B, 3, 3).unwrap();
        let fit = gmwy_fit(&p, &support).unwrap();
        for j in 0..7 {
            assert_eq!(fit.a_hat.get(0, j), 0.0);
            assert_eq!(fit.b_hat.get(0, j), 0.0);
        }
        assert!(fit.b_hat.get(3, 3) != 0.0);
    }

    #[test]
    fn gmwy_rejects_overfull_equation() {
        let support = SupportSet::band(4, 3);
        let m = interior_model(7, 1, 3);
        let p = simulate_var(&m, 100, 50, RngSpec::new(1, 0)).unwrap();
        // bandwidth 3 on N=4 gives 7 columns > 4 moment conditions for row 1
        let p4 = Panel::with_default_labels(Mat::from_fn(4, 100, |i, s| {
            p.values.get(i, s)
        }));
        assert!(gmwy_fit(&p4, &support).is_err());
    }

    #[test]
    fn support_rejects_diagonal_a() {
        let mut s = SupportSet::new();
        assert!(s.insert(CoeffMatrix::A, 2, 2).is_err());
        assert!(s.insert(CoeffMatrix::B, 2, 2).is_ok());
    }

    #[test]
    fn pvar_zero_lambda_matches_least_squares() {
        let m = interior_model(6, 1, 9);
        let p = simulate_var(&m, 2000, 200, RngSpec::new(4, 0)).unwrap();
        let c = pvar_fit(&p, 0.0, 1e-12, 100_000).unwrap();
        // normal-equations oracle
        let n = 6;
        let t = p.n_time();
        let mut gram = Mat::zeros(n, n);
        let mut cross = Mat::zeros(n, n);
        for s in 1..t {
            let y = p.at(s);
            let x = p.at(s - 1);
            for i in 0..n {
                for j in 0..n {
                    gram.set(i, j, gram.get(i, j) + x[i] * x[j]);
                    cross.set(i, j, cross.get(i, j) + y[i] * x[j]);
                }
            }
        }
        let ls = crate::linalg::solve_linear(&gram, &cross.transpose()).unwrap().transpose();
        assert!(c.sub(&ls).norm_max() < 1e-8, "diff {}", c.sub(&ls).norm_max());
    }

    #[test]
    fn pvar_large_lambda_is_zero() {
        let m = interior_model(6, 1, 9);
        let p = simulate_var(&m, 400, 100, RngSpec::new(6, 0)).unwrap();
        // lambda above twice the largest absolute cross moment zeroes every row
        let n = 6;
        let t = p.n_time();
        let mut worst = 0.0_f64;
        for s in 1..t {
            let y = p.at(s);
            let x = p.at(s - 1);
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((y[i] * x[j]).abs());
                }
            }
        }
        let c = pvar_fit(&p, 2.0 * worst * t as f64, 1e-10, 10_000).unwrap();
        assert_eq!(c.norm_max(), 0.0);
    }

    #[test]
    fn pvar_deterministic() {
        let m = interior_model(6, 1, 9);
        let p = simulate_var(&m, 300, 100, RngSpec::new(8, 0)).unwrap();
        let c1 = pvar_fit(&p, 0.7, 1e-10, 10_000).unwrap();
        let c2 = pvar_fit(&p, 0.7, 1e-10, 10_000).unwrap();
        assert_eq!(c1.sub(&c2).norm_max(), 0.0);
    }

    #[test]
    fn const_forecast_examples() {
        let p = Panel::with_default_labels(Mat::from_fn(2, 4, |i, _| i as f64 + 1.0));
        assert_eq!(const_forecast(&p), vec![1.0, 2.0]);
        let one = Panel::with_default_labels(Mat::new(2, 1, vec![5.0, -1.0]).unwrap());
        assert_eq!(const_forecast(&one), vec![5.0, -1.0]);
        let two = Panel::with_default_labels(Mat::new(1, 2, vec![1.0, 3.0]).unwrap());
        assert_eq!(const_forecast(&two), vec![2.0]);
    }

    #[test]
    fn forecast_one_step_examples() {
        let m = interior_model(6, 1, 2);
        let rf = reduced_form(&m).unwrap();
        let y: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let f = forecast_one_step(&m.a, &m.b, &y).unwrap();
        let truth = rf.c.matvec(&y);
        for (a, b) in f.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = forecast_one_step(&m.a, &m.b, &vec![0.0; 6]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let bmat = Mat::identity(3).scale(0.5);
        let plain = forecast_one_step(&Mat::zeros(3, 3), &bmat, &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(plain, vec![1.0, 2.0, 3.0]);
    }
}
