//! Shared helpers for integration tests: independent reference
//! implementations (subgradient and coordinate-descent solvers written
//! against the dense stacked design) and model generators.

#![allow(dead_code)]

use splash::linalg::Mat;
use splash::model::{reduced_form, StModel};
use splash::simulate::{Panel, RngSpec};
use splash::yule_walker::{CoeffMatrix, YwSystem};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Materialize the block-diagonal stacked design as one dense matrix:
/// equation i's block occupies rows i*N..(i+1)*N and its coefficient
/// segment's columns.
pub fn dense_design(sys: &YwSystem) -> Mat {
    let n = sys.layout.n_units;
    let p = sys.layout.len();
    let mut x = Mat::zeros(n * n, p);
    for i in 0..n {
        let block = &sys.blocks[i];
        let off = sys.layout.equation_offsets[i];
        for r in 0..block.rows() {
            for c in 0..block.cols() {
                x.set(i * n + r, off + c, block.get(r, c));
            }
        }
    }
    x
}

fn penalty_value(c: &[f64], lambda: f64, alpha: f64, sys: &YwSystem) -> f64 {
    let mut group_part = 0.0;
    for g in &sys.layout.groups {
        let norm: f64 = g.members.iter().map(|&p| c[p] * c[p]).sum::<f64>().sqrt();
        group_part += g.weight * norm;
    }
    let l1: f64 = c.iter().map(|x| x.abs()).sum();
    lambda * ((1.0 - alpha) * group_part + alpha * l1)
}

/// Full objective evaluated from scratch against the dense design.
pub fn dense_objective(c: &[f64], lambda: f64, alpha: f64, sys: &YwSystem) -> f64 {
    let x = dense_design(sys);
    let mut loss = 0.0;
    for r in 0..x.rows() {
        let mut pred = 0.0;
        for j in 0..x.cols() {
            pred += x.get(r, j) * c[j];
        }
        let e = sys.target[r] - pred;
        loss += e * e;
    }
    loss + penalty_value(c, lambda, alpha, sys)
}

/// Reference solver: plain subgradient descent with a diminishing step,
/// keeping the best iterate. Slow but independent of the production solver's
/// block structure, prox operators and screening rules.
pub fn subgradient_oracle(
    sys: &YwSystem,
    lambda: f64,
    alpha: f64,
    n_iter: usize,
    start: Option<&[f64]>,
) -> (Vec<f64>, f64) {
    let x = dense_design(sys);
    let p = x.cols();
    let rows = x.rows();
    // squared spectral norm bound via Frobenius for the base step size
    let mut fro2 = 0.0;
    for r in 0..rows {
        for j in 0..p {
            fro2 += x.get(r, j) * x.get(r, j);
        }
    }
    let base_step = 0.5 / (2.0 * fro2 + lambda + 1.0);
    let mut c = start.map_or_else(|| vec![0.0; p], |s| s.to_vec());
    let mut best = c.clone();
    let mut best_obj = dense_objective(&c, lambda, alpha, sys);
    let mut resid = vec![0.0; rows];
    for r in 0..rows {
        let mut pred = 0.0;
        for j in 0..p {
            pred += x.get(r, j) * c[j];
        }
        resid[r] = sys.target[r] - pred;
    }
    for k in 0..n_iter {
        // gradient of the quadratic part: -2 X' r
        let mut grad = vec![0.0; p];
        for r in 0..rows {
            let rr = resid[r];
            if rr == 0.0 {
                continue;
            }
            for j in 0..p {
                grad[j] -= 2.0 * x.get(r, j) * rr;
            }
        }
        // subgradient of the penalty (zero at kinks)
        for g in &sys.layout.groups {
            let norm: f64 = g.members.iter().map(|&q| c[q] * c[q]).sum::<f64>().sqrt();
            if norm > 0.0 {
                for &q in &g.members {
                    grad[q] += lambda * (1.0 - alpha) * g.weight * c[q] / norm;
                }
            }
        }
        for j in 0..p {
            if c[j] != 0.0 {
                grad[j] += lambda * alpha * c[j].signum();
            }
        }
        let step = base_step / ((k + 1) as f64).sqrt();
        for j in 0..p {
            c[j] -= step * grad[j];
        }
        for r in 0..rows {
            let mut pred = 0.0;
            for j in 0..p {
                pred += x.get(r, j) * c[j];
            }
            resid[r] = sys.target[r] - pred;
        }
        let obj = resid.iter().map(|e| e * e).sum::<f64>() + penalty_value(&c, lambda, alpha, sys);
        if obj < best_obj {
            best_obj = obj;
            best = c.clone();
        }
    }
    (best, best_obj)
}

/// Reference lasso (alpha = 1) solved by textbook coordinate descent on the
/// dense design: c_j <- soft(x_j'(r + x_j c_j), lambda/2) / ||x_j||^2.
pub fn lasso_cd_oracle(sys: &YwSystem, lambda: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let x = dense_design(sys);
    let p = x.cols();
    let rows = x.rows();
    let col_sq: Vec<f64> =
        (0..p).map(|j| (0..rows).map(|r| x.get(r, j).powi(2)).sum()).collect();
    let mut c = vec![0.0; p];
    let mut resid: Vec<f64> = sys.target.clone();
    for _ in 0..max_iter {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for r in 0..rows {
                dot += x.get(r, j) * resid[r];
            }
            let z = dot + col_sq[j] * c[j];
            let soft = if z > lambda / 2.0 {
                z - lambda / 2.0
            } else if z < -lambda / 2.0 {
                z + lambda / 2.0
            } else {
                0.0
            };
            let new = soft / col_sq[j];
            let delta = new - c[j];
            if delta != 0.0 {
                for r in 0..rows {
                    resid[r] -= x.get(r, j) * delta;
                }
                c[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change <= tol {
            break;
        }
    }
    c
}

/// Random stable model whose A is supported on interior rows and columns
/// only and whose B vanishes on boundary rows: every admissible coefficient
/// is then identified by the population Yule-Walker system.
pub fn interior_model(n: usize, cap: usize, seed: u64) -> StModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    loop {
        let mut a = Mat::zeros(n, n);
        let mut b = Mat::zeros(n, n);
        for i in 2..n - 2 {
            for j in 2..n - 2 {
                if i != j && i.abs_diff(j) <= cap {
                    let mag = rng.gen_range(0.1..0.3);
                    a.set(i, j, if rng.gen_bool(0.5) { mag } else { -mag });
                }
            }
            b.set(i, i, 0.45);
            for j in 0..n {
                if j != i && i.abs_diff(j) <= cap {
                    let mag = rng.gen_range(0.08..0.2);
                    b.set(i, j, if rng.gen_bool(0.5) { mag } else { -mag });
                }
            }
        }
        let model = StModel::new(a, b, Mat::identity(n), cap, 0).unwrap();
        let rf = reduced_form(&model).unwrap();
        if rf.c.spectral_norm_default().unwrap() <= 0.95 {
            return model;
        }
    }
}

/// Random panel of iid standard normal noise.
pub fn noise_panel(n: usize, t: usize, seed: u64) -> Panel {
    let model = StModel::new(Mat::zeros(n, n), Mat::zeros(n, n), Mat::identity(n), 0, 0).unwrap();
    splash::simulate::simulate_var(&model, t, 5, RngSpec::new(seed, 0)).unwrap()
}

/// Max-norm distance between a stacked coefficient vector and the
/// model's (A, B) restricted to the layout.
pub fn coeff_max_error(c: &[f64], model: &StModel, sys: &YwSystem) -> f64 {
    let mut worst = 0.0_f64;
    for (pos, &(m, i, j)) in sys.layout.entries.iter().enumerate() {
        let truth = match m {
            CoeffMatrix::A => model.a.get(i, j),
            CoeffMatrix::B => model.b.get(i, j),
        };
        worst = worst.max((c[pos] - truth).abs());
    }
    worst
}
