//! Sparse group lasso solver for the block-diagonal Yule-Walker least-squares
//! problem: penalty evaluation, block coordinate descent over diagonal groups,
//! and regularization paths.
//!
//! The objective is the unnormalized
//! `||sigma - V c||^2 + lambda * [(1-alpha) sum_g sqrt(|g|) ||c_g||_2 + alpha ||c||_1]`
//! so the loss gradient carries a factor 2 and `lambda_max` is scaled
//! accordingly.

use crate::error::{Error, Result};
use crate::linalg::{pinv_solve_normal, Mat};
use crate::yule_walker::{GroupLayout, YwSystem};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// A fitted coefficient vector with its matrix form and solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplashFit {
    pub c_hat: Vec<f64>,
    pub a_hat: Mat,
    pub b_hat: Mat,
    pub lambda: f64,
    pub alpha: f64,
    pub objective: f64,
    pub n_iter: usize,
    pub kkt_residual: f64,
}

/// `P_alpha(c) = (1-alpha) sum_g sqrt(|g|) ||c_g||_2 + alpha ||c||_1`.
pub fn penalty(c: &[f64], alpha: f64, layout: &GroupLayout) -> Result<f64> {
    if c.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "coefficient vector has length {}, layout expects {}",
            c.len(),
            layout.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must lie in [0,1]".into()));
    }
    let l1: f64 = c.iter().map(|x| x.abs()).sum();
    let mut group_term = 0.0;
    for g in &layout.groups {
        let norm: f64 = g.members.iter().map(|&p| c[p] * c[p]).sum::<f64>().sqrt();
        group_term += g.weight * norm;
    }
    Ok((1.0 - alpha) * group_term + alpha * l1)
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

/// Precomputed per-position design columns: for each stacked position, the
/// owning equation and the corresponding column of that equation's block.
struct Columns {
    equation: Vec<usize>,
    col: Vec<Vec<f64>>,
}

impl Columns {
    fn new(sys: &YwSystem) -> Self {
        let layout = &sys.layout;
        let p = layout.len();
        let mut equation = Vec::with_capacity(p);
        let mut col = Vec::with_capacity(p);
        for pos in 0..p {
            let eq = layout.equation_of(pos);
            let local = pos - layout.equation_offsets[eq];
            equation.push(eq);
            col.push(sys.blocks[eq].col(local));
        }
        Columns { equation, col }
    }
}

/// Residual `sigma - V c`, stacked per equation.
fn residual(sys: &YwSystem, cols: &Columns, c: &[f64]) -> Vec<f64> {
    let n = sys.n_units();
    let mut r = sys.target.clone();
    for (pos, &cj) in c.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        let base = cols.equation[pos] * n;
        for (t, v) in cols.col[pos].iter().enumerate() {
            r[base + t] -= v * cj;
        }
    }
    r
}

fn loss_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// `z_g = 2 V_g' r` for the members of one group.
fn group_correlation(cols: &Columns, r: &[f64], members: &[usize], n: usize) -> Vec<f64> {
    members
        .iter()
        .map(|&pos| {
            let base = cols.equation[pos] * n;
            2.0 * cols.col[pos]
                .iter()
                .enumerate()
                .map(|(t, v)| v * r[base + t])
                .sum::<f64>()
        })
        .collect()
}

/// Spectral norm of one group's design block. Columns belonging to different
/// equations are orthogonal in the stacked loss, so the norm is computed by
/// power iteration on the member Gram matrix.
fn group_block_norm_sq(cols: &Columns, members: &[usize], n: usize) -> f64 {
    let m = members.len();
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let (pa, pb) = (members[a], members[b]);
            let dot = if cols.equation[pa] == cols.equation[pb] {
                cols.col[pa]
                    .iter()
                    .zip(&cols.col[pb])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            } else {
                0.0
            };
            gram[a * m + b] = dot;
            gram[b * m + a] = dot;
        }
    }
    let _ = n;
    // power iteration on the Gram matrix (largest eigenvalue = ||V_g||^2)
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut lam = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                w[a] += gram[a * m + b] * v[b];
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / norm;
        }
        if (next - lam).abs() <= 1e-12 * next.max(1.0) {
            lam = next;
            break;
        }
        lam = next;
    }
    lam
}

/// KKT residual of the sparse-group-lasso stationarity conditions at `c`,
/// measured in the max norm over groups and coordinates.
fn kkt_residual(
    sys: &YwSystem,
    cols: &Columns,
    c: &[f64],
    r: &[f64],
    lambda: f64,
    alpha: f64,
) -> f64 {
    let n = sys.n_units();
    let layout = &sys.layout;
    let mut worst = 0.0_f64;
    for g in &layout.groups {
        let z = group_correlation(cols, r, &g.members, n);
        let gnorm: f64 = g.members.iter().map(|&p| c[p] * c[p]).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            // joint condition: ||soft(z, alpha*lambda)||_2 <= (1-alpha)*lambda*w
            let s: f64 = z
                .iter()
                .map(|&x| {
                    let t = soft(x, alpha * lambda);
                    t * t
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max((s - (1.0 - alpha) * lambda * g.weight).max(0.0));
        } else {
            for (k, &pos) in g.members.iter().enumerate() {
                let grad = -z[k] + lambda * (1.0 - alpha) * g.weight * c[pos] / gnorm;
                let viol = if c[pos] != 0.0 {
                    (grad + lambda * alpha * c[pos].signum()).abs()
                } else {
                    (grad.abs() - lambda * alpha).max(0.0)
                };
                worst = worst.max(viol);
            }
        }
    }
    worst
}

fn objective(sys: &YwSystem, cols: &Columns, c: &[f64], lambda: f64, alpha: f64) -> f64 {
    loss_of(&residual(sys, cols, c)) + lambda * penalty(c, alpha, &sys.layout).unwrap_or(f64::NAN)
}

/// Per-equation least squares, used for the unpenalized case where the loss
/// decouples across equations. Falls back to the minimum-norm solution on
/// rank-deficient blocks.
fn least_squares(sys: &YwSystem) -> Result<Vec<f64>> {
    let layout = &sys.layout;
    let mut c = vec![0.0; layout.len()];
    for (i, block) in sys.blocks.iter().enumerate() {
        if block.cols() == 0 {
            continue;
        }
        let xtx = block.transpose().matmul(block);
        let t = sys.target_of(i);
        let xty = block.tr_matvec(t);
        let (sol, _) = pinv_solve_normal(&xtx, &xty)?;
        let start = layout.equation_offsets[i];
        c[start..start + sol.len()].copy_from_slice(&sol);
    }
    Ok(c)
}

/// Fit by block coordinate descent over the diagonal groups.
///
/// Each sweep applies the group-zero test
/// `||soft(2 V_g' rho, alpha*lambda)||_2 <= (1-alpha)*lambda*sqrt(|g|)`
/// (ties resolve to zero) and otherwise minimizes the group subproblem by
/// proximal gradient with backtracking. Terminates when the largest
/// coefficient change in a sweep is at most `tol`.
pub fn fit(
    sys: &YwSystem,
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> Result<SplashFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must lie in [0,1]".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let layout = &sys.layout;
    let p = layout.len();
    if let Some(w) = warm_start {
        if w.len() != p {
            return Err(Error::Dimension(format!(
                "warm start has length {}, layout expects {p}",
                w.len()
            )));
        }
    }
    let cols = Columns::new(sys);
    let n = sys.n_units();

    if lambda == 0.0 {
        let c = least_squares(sys)?;
        let r = residual(sys, &cols, &c);
        let kkt = kkt_for_unpenalized(&cols, &r, p, n);
        return Ok(finish(sys, &cols, c, lambda, alpha, 1, kkt));
    }

    let mut c: Vec<f64> = warm_start.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; p]);
    let mut r = residual(sys, &cols, &c);
    let block_norms: Vec<f64> = layout
        .groups
        .iter()
        .map(|g| group_block_norm_sq(&cols, &g.members, n))
        .collect();

    let mut last_change = f64::INFINITY;
    for sweep in 1..=max_iter {
        #[cfg(debug_assertions)]
        let obj_before = objective(sys, &cols, &c, lambda, alpha);
        let mut max_change = 0.0_f64;
        for (gi, g) in layout.groups.iter().enumerate() {
            if g.members.is_empty() {
                continue;
            }
            // partial residual with this group removed
            let mut rho = r.clone();
            let mut any_nonzero = false;
            for &pos in &g.members {
                let cj = c[pos];
                if cj != 0.0 {
                    any_nonzero = true;
                    let base = cols.equation[pos] * n;
                    for (t, v) in cols.col[pos].iter().enumerate() {
                        rho[base + t] += v * cj;
                    }
                }
            }
            let z = group_correlation(&cols, &rho, &g.members, n);
            let s_norm: f64 = z
                .iter()
                .map(|&x| {
                    let t = soft(x, alpha * lambda);
                    t * t
                })
                .sum::<f64>()
                .sqrt();
            if s_norm <= (1.0 - alpha) * lambda * g.weight {
                if any_nonzero {
                    for &pos in &g.members {
                        max_change = max_change.max(c[pos].abs());
                        c[pos] = 0.0;
                    }
                    r = rho;
                }
                continue;
            }
            // within-group proximal gradient with backtracking
            let mut u: Vec<f64> = g.members.iter().map(|&pp| c[pp]).collect();
            let lips = 2.0 * block_norms[gi];
            let mut step = if lips > 0.0 { 1.0 / lips } else { 1.0 };
            let m = g.members.len();
            // residual restricted to the group: ru = rho - V_g u
            let apply = |u: &[f64], rho: &[f64]| -> Vec<f64> {
                let mut ru = rho.to_vec();
                for (k, &pos) in g.members.iter().enumerate() {
                    if u[k] != 0.0 {
                        let base = cols.equation[pos] * n;
                        for (t, v) in cols.col[pos].iter().enumerate() {
                            ru[base + t] -= v * u[k];
                        }
                    }
                }
                ru
            };
            let mut ru = apply(&u, &rho);
            let mut fu = loss_of(&ru);
            for _ in 0..200 {
                // gradient of the smooth part at u
                let grad: Vec<f64> = g
                    .members
                    .iter()
                    .map(|&pos| {
                        let base = cols.equation[pos] * n;
                        -2.0 * cols.col[pos]
                            .iter()
                            .enumerate()
                            .map(|(t, v)| v * ru[base + t])
                            .sum::<f64>()
                    })
                    .collect();
                let mut accepted = None;
                for _ in 0..60 {
                    // sparse group lasso prox: soft threshold then group shrink
                    let mut cand = vec![0.0; m];
                    for k in 0..m {
                        cand[k] = soft(u[k] - step * grad[k], step * lambda * alpha);
                    }
                    let cn: f64 = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let shrink = step * lambda * (1.0 - alpha) * g.weight;
                    if cn <= shrink {
                        cand.iter_mut().for_each(|x| *x = 0.0);
                    } else {
                        let sc = 1.0 - shrink / cn;
                        cand.iter_mut().for_each(|x| *x *= sc);
                    }
                    let r_cand = apply(&cand, &rho);
                    let f_cand = loss_of(&r_cand);
                    let diff: Vec<f64> = cand.iter().zip(&u).map(|(a, b)| a - b).collect();
                    let lin: f64 = grad.iter().zip(&diff).map(|(a, b)| a * b).sum();
                    let quad: f64 = diff.iter().map(|x| x * x).sum::<f64>() / (2.0 * step);
                    if f_cand <= fu + lin + quad + 1e-12 * fu.abs().max(1.0) {
                        accepted = Some((cand, r_cand, f_cand));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((cand, r_cand, f_cand)) = accepted else { break };
                let delta: f64 = cand
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                u = cand;
                ru = r_cand;
                fu = f_cand;
                if delta <= tol * 0.1 {
                    break;
                }
            }
            for (k, &pos) in g.members.iter().enumerate() {
                max_change = max_change.max((c[pos] - u[k]).abs());
                c[pos] = u[k];
            }
            r = ru;
        }
        #[cfg(debug_assertions)]
        {
            let obj_after = objective(sys, &cols, &c, lambda, alpha);
            debug_assert!(
                obj_after <= obj_before + 1e-9 * obj_before.abs().max(1.0),
                "objective increased within a sweep: {obj_before} -> {obj_after}"
            );
        }
        last_change = max_change;
        if max_change <= tol {
            let kkt = kkt_residual(sys, &cols, &c, &r, lambda, alpha);
            return Ok(finish(sys, &cols, c, lambda, alpha, sweep, kkt));
        }
    }
    let kkt = kkt_residual(sys, &cols, &c, &r, lambda, alpha);
    Err(Error::SolverMaxIter {
        max_iter,
        last_change,
        kkt,
        last_iterate: c,
    })
}

fn kkt_for_unpenalized(cols: &Columns, r: &[f64], p: usize, n: usize) -> f64 {
    (0..p)
        .map(|pos| {
            let base = cols.equation[pos] * n;
            2.0 * cols.col[pos]
                .iter()
                .enumerate()
                .map(|(t, v)| v * r[base + t])
                .sum::<f64>()
        })
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn finish(
    sys: &YwSystem,
    cols: &Columns,
    c: Vec<f64>,
    lambda: f64,
    alpha: f64,
    n_iter: usize,
    kkt: f64,
) -> SplashFit {
    let obj = objective(sys, cols, &c, lambda, alpha);
    let (a_hat, b_hat) = reconstruct(&c, &sys.layout);
    SplashFit {
        c_hat: c,
        a_hat,
        b_hat,
        lambda,
        alpha,
        objective: obj,
        n_iter,
        kkt_residual: kkt,
    }
}

/// Smallest lambda whose fit is the zero vector.
///
/// With `z = 2 V' sigma`, the zero vector is stationary iff every group
/// satisfies `||soft(z_g, alpha*lambda)||_2 <= (1-alpha)*lambda*sqrt(|g|)`.
/// For `alpha = 1` this is `max_j |z_j|`; for `alpha < 1` each group's
/// critical value is found by bisection to 1e-10 relative accuracy.
pub fn lambda_max(sys: &YwSystem, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must lie in [0,1]".into()));
    }
    let cols = Columns::new(sys);
    let n = sys.n_units();
    let mut out = 0.0_f64;
    for g in &sys.layout.groups {
        if g.members.is_empty() {
            continue;
        }
        let z = group_correlation(&cols, &sys.target, &g.members, n);
        let zmax = z.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        if zmax == 0.0 {
            continue;
        }
        let lam_g = if alpha == 1.0 {
            zmax
        } else if alpha == 0.0 {
            z.iter().map(|x| x * x).sum::<f64>().sqrt() / g.weight
        } else {
            let crit = |lam: f64| -> f64 {
                let s: f64 = z
                    .iter()
                    .map(|&x| {
                        let t = soft(x, alpha * lam);
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt();
                s - (1.0 - alpha) * lam * g.weight
            };
            let mut lo = 0.0;
            let mut hi = zmax / alpha; // soft(z, alpha*hi) = 0, so crit(hi) < 0
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if crit(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-10 * hi.max(1.0) {
                    break;
                }
            }
            hi
        };
        out = out.max(lam_g);
    }
    Ok(out)
}

/// Geometric grid from `lmax` down to `ratio * lmax`, descending.
pub fn lambda_path(lmax: f64, n_points: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be >= 1".into()));
    }
    if !(lmax.is_finite() && lmax >= 0.0) {
        return Err(Error::InvalidArgument("lmax must be finite and >= 0".into()));
    }
    if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument("ratio must lie in (0,1]".into()));
    }
    if n_points == 1 {
        return Ok(vec![lmax]);
    }
    let step = ratio.powf(1.0 / (n_points - 1) as f64);
    let mut out = Vec::with_capacity(n_points);
    let mut cur = lmax;
    for _ in 0..n_points {
        out.push(cur);
        cur *= step;
    }
    Ok(out)
}

/// Scatter a stacked coefficient vector into `(A_hat, B_hat)`.
pub fn reconstruct(c: &[f64], layout: &GroupLayout) -> (Mat, Mat) {
    let n = layout.n_units;
    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, n);
    for (pos, &(m, i, j)) in layout.entries.iter().enumerate() {
        match m {
            crate::yule_walker::CoeffMatrix::A => a.set(i, j, c[pos]),
            crate::yule_walker::CoeffMatrix::B => b.set(i, j, c[pos]),
        }
    }
    (a, b)
}
