//! The structural model (A, B, Sigma_eps), its stability and bandedness
//! checks, the reduced form, and population autocovariances.
//!
//! The population Yule-Walker identity `Sigma_1 = A Sigma_1 + B Sigma_0`
//! serves as the exactness oracle for the whole estimation pipeline.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_linear, Mat};
use serde::{Deserialize, Serialize};

/// Structural triple of the spatio-temporal autoregression
/// `y_t = A y_t + B y_{t-1} + eps_t` with zero diagonal in A and banded
/// coefficient matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StModel {
    pub a: Mat,
    pub b: Mat,
    pub sigma_eps: Mat,
    /// Coefficient bandwidth k: `a_ij = b_ij = 0` for `|i-j| > k`.
    pub bandwidth_k: usize,
    /// Innovation covariance bandwidth l0.
    pub bandwidth_l0: usize,
}

impl StModel {
    pub fn new(a: Mat, b: Mat, sigma_eps: Mat, bandwidth_k: usize, bandwidth_l0: usize) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || !b.is_square() || !sigma_eps.is_square() || b.rows() != n || sigma_eps.rows() != n {
            return Err(Error::Dimension("model matrices must be square and same size".into()));
        }
        for i in 0..n {
            if a.get(i, i) != 0.0 {
                return Err(Error::InvalidArgument(format!("a[{i},{i}] must be zero")));
            }
            for j in 0..n {
                if i.abs_diff(j) > bandwidth_k && (a.get(i, j) != 0.0 || b.get(i, j) != 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient at ({i},{j}) outside bandwidth {bandwidth_k}"
                    )));
                }
                if i.abs_diff(j) > bandwidth_l0 && sigma_eps.get(i, j) != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sigma_eps[{i},{j}] outside bandwidth {bandwidth_l0}"
                    )));
                }
                if (sigma_eps.get(i, j) - sigma_eps.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("sigma_eps must be symmetric".into()));
                }
            }
        }
        cholesky(&sigma_eps)
            .map_err(|_| Error::InvalidArgument("sigma_eps must be positive definite".into()))?;
        Ok(Self { a, b, sigma_eps, bandwidth_k, bandwidth_l0 })
    }

    pub fn n_units(&self) -> usize {
        self.a.rows()
    }
}

/// Reduced form `y_t = C y_{t-1} + D eps_t` with `C = (I-A)^{-1} B` and
/// `D = (I-A)^{-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedForm {
    pub c: Mat,
    pub d: Mat,
}

/// Outcome of the stability checks. Non-throwing so simulation code can
/// implement rejection resampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub a_norm_one_inf: f64,
    pub b_norm_one_inf: f64,
    /// `norm_one_inf(A) <= delta_a`
    pub clause_a: bool,
    /// `norm_one_inf(B) / (1 - delta_a) < 1`
    pub clause_b: bool,
    /// Spectral norm of the reduced-form C, when I - A is invertible.
    pub spectral_c: Option<f64>,
    pub pass: bool,
}

/// Check the stability clauses for a given contraction level `delta_a`.
pub fn check_stability(m: &StModel, delta_a: f64) -> Result<StabilityReport> {
    if !(0.0 < delta_a && delta_a < 1.0) {
        return Err(Error::InvalidArgument("delta_a must lie in (0,1)".into()));
    }
    let a_norm = m.a.norm_one_inf();
    let b_norm = m.b.norm_one_inf();
    let clause_a = a_norm <= delta_a;
    let clause_b = b_norm / (1.0 - delta_a) < 1.0;
    let spectral_c = reduced_form(m)
        .ok()
        .and_then(|rf| rf.c.spectral_norm_default().ok());
    Ok(StabilityReport {
        a_norm_one_inf: a_norm,
        b_norm_one_inf: b_norm,
        clause_a,
        clause_b,
        spectral_c,
        pass: clause_a && clause_b,
    })
}

pub fn reduced_form(m: &StModel) -> Result<ReducedForm> {
    let n = m.n_units();
    let i_minus_a = Mat::identity(n).sub(&m.a);
    let c = solve_linear(&i_minus_a, &m.b)?;
    let d = solve_linear(&i_minus_a, &Mat::identity(n))?;
    Ok(ReducedForm { c, d })
}

/// Population autocovariance of the reduced form.
///
/// Lag 0 is the fixed point of `S <- C S C' + D Sigma_eps D'` iterated until
/// the successive max-norm change is at most `tol`; lag j >= 1 is `C^j S_0`.
pub fn population_autocov(rf: &ReducedForm, sigma_eps: &Mat, lag: usize, tol: f64) -> Result<Mat> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let rho = rf.c.spectral_norm_default()?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let q = rf.d.matmul(sigma_eps).matmul(&rf.d.transpose());
    let mut s = q.clone();
    let max_iter = 100_000;
    let mut converged = false;
    for _ in 0..max_iter {
        let next = rf.c.matmul(&s).matmul(&rf.c.transpose()).add(&q);
        let change = next.sub(&s).norm_max();
        s = next;
        if change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iters: max_iter, last: s.norm_max() });
    }
    // symmetrize against round-off drift
    s = s.add(&s.transpose()).scale(0.5);
    let mut out = s;
    for _ in 0..lag {
        out = rf.c.matmul(&out);
    }
    Ok(out)
}
