//! Sample autocovariance matrices, their banded counterparts, and bandwidth
//! selection by a circular-block-bootstrap risk estimate.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::simulate::{Panel, RngSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Lag-0 and lag-1 sample autocovariances, optionally banded at `h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcovPair {
    pub sigma0: Mat,
    pub sigma1: Mat,
    pub h: Option<usize>,
}

/// `(1/T) sum_{t=2}^T y_t y'_{t-lag}`. The divisor is the full sample length
/// T and the sum starts at the second observation for both lags.
pub fn sample_autocov(p: &Panel, lag: usize) -> Result<Mat> {
    if lag > 1 {
        return Err(Error::InvalidArgument("lag must be 0 or 1".into()));
    }
    let t = p.n_time();
    if t < lag + 2 {
        return Err(Error::InvalidArgument(format!("need at least {} time points", lag + 2)));
    }
    let n = p.n_units();
    let mut out = Mat::zeros(n, n);
    for s in 1..t {
        let y = p.at(s);
        let ylag = p.at(s - lag);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, out.get(i, j) + y[i] * ylag[j]);
            }
        }
    }
    Ok(out.scale(1.0 / t as f64))
}

pub fn banded_autocov(p: &Panel, h: usize) -> Result<AcovPair> {
    let sigma0 = sample_autocov(p, 0)?.band(h);
    let sigma1 = sample_autocov(p, 1)?.band(h);
    Ok(AcovPair { sigma0, sigma1, h: Some(h) })
}

pub fn unbanded_autocov(p: &Panel) -> Result<AcovPair> {
    Ok(AcovPair {
        sigma0: sample_autocov(p, 0)?,
        sigma1: sample_autocov(p, 1)?,
        h: None,
    })
}

pub const DEFAULT_N_BOOT: usize = 50;

pub fn default_block_len(t: usize) -> usize {
    (t as f64).powf(1.0 / 3.0).ceil() as usize
}

/// Pick the banding level from `h_grid` minimizing a resampled split-sample
/// risk. Each replicate partitions circular blocks of time points into two
/// halves, and accumulates `||B_h(S0^(1)) - S0^(2)||_F + ||B_h(S1^(1)) -
/// S1^(2)||_F` where the two autocovariance estimates come from disjoint
/// halves. Disjoint halves keep the comparison target's noise independent of
/// the banded estimate's noise, so over-banding is penalized in expectation;
/// comparing against the full-sample estimate would not achieve that, because
/// bootstrap noise is centered on the very sample noise being banded away.
/// Ties resolve to the smaller h.
pub fn select_bandwidth(
    p: &Panel,
    h_grid: &[usize],
    n_boot: usize,
    block_len: usize,
    rng: RngSpec,
) -> Result<usize> {
    if h_grid.is_empty() {
        return Err(Error::InvalidArgument("h_grid must be nonempty".into()));
    }
    if n_boot < 2 {
        return Err(Error::InvalidArgument("n_boot must be >= 2".into()));
    }
    let t = p.n_time();
    if block_len == 0 || block_len >= t {
        return Err(Error::InvalidArgument(format!(
            "block_len {block_len} must be in [1, n_time)"
        )));
    }
    let mut risks = vec![0.0; h_grid.len()];
    let mut rng = rng.rng();
    let n = p.n_units();
    let half = t / 2;
    for _ in 0..n_boot {
        // draw circular blocks, alternating them between the two halves
        let mut cols_a = Vec::with_capacity(half);
        let mut cols_b = Vec::with_capacity(t - half);
        let mut into_a = true;
        while cols_a.len() < half || cols_b.len() < t - half {
            let start = rng.gen_range(0..t);
            let (cols, target) = if into_a && cols_a.len() < half {
                (&mut cols_a, half)
            } else {
                (&mut cols_b, t - half)
            };
            for k in 0..block_len {
                if cols.len() == target {
                    break;
                }
                cols.push((start + k) % t);
            }
            into_a = !into_a;
        }
        let pa = Panel::with_default_labels(Mat::from_fn(n, cols_a.len(), |i, s| {
            p.values.get(i, cols_a[s])
        }));
        let pb = Panel::with_default_labels(Mat::from_fn(n, cols_b.len(), |i, s| {
            p.values.get(i, cols_b[s])
        }));
        let a0 = sample_autocov(&pa, 0)?;
        let a1 = sample_autocov(&pa, 1)?;
        let b0 = sample_autocov(&pb, 0)?;
        let b1 = sample_autocov(&pb, 1)?;
        for (r, &h) in risks.iter_mut().zip(h_grid) {
            *r += a0.band(h).sub(&b0).norm_frobenius() + a1.band(h).sub(&b1).norm_frobenius();
        }
    }
    let mut best = (h_grid[0], f64::INFINITY);
    for (&h, &r) in h_grid.iter().zip(&risks) {
        if r < best.1 {
            best = (h, r);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{population_autocov, reduced_form};
    use crate::simulate::{gen_design_b, simulate_var};

    #[test]
    fn constant_panel_autocov() {
        let t = 10;
        let v = [1.0, -2.0];
        let p = Panel::with_default_labels(Mat::from_fn(2, t, |i, _| v[i]));
        let s0 = sample_autocov(&p, 0).unwrap();
        let frac = (t - 1) as f64 / t as f64;
        for i in 0..2 {
            for j in 0..2 {
                assert!((s0.get(i, j) - frac * v[i] * v[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_unit_lag_one_by_hand() {
        let p = Panel::with_default_labels(Mat::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap());
        let s1 = sample_autocov(&p, 1).unwrap();
        assert!((s1.get(0, 0) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_panel_errors() {
        let p = Panel::with_default_labels(Mat::new(1, 2, vec![1.0, 2.0]).unwrap());
        assert!(sample_autocov(&p, 1).is_err());
    }

    #[test]
    fn long_run_matches_population() {
        let m = gen_design_b(3, 0.2, 0.25).unwrap();
        let rf = reduced_form(&m).unwrap();
        let pop0 = population_autocov(&rf, &m.sigma_eps, 0, 1e-12).unwrap();
        let pop1 = population_autocov(&rf, &m.sigma_eps, 1, 1e-12).unwrap();
        let p = simulate_var(&m, 100_000, 500, RngSpec::new(3, 0)).unwrap();
        assert!(sample_autocov(&p, 0).unwrap().sub(&pop0).norm_max() < 0.05);
        assert!(sample_autocov(&p, 1).unwrap().sub(&pop1).norm_max() < 0.05);
    }

    #[test]
    fn banding_consistency() {
        let m = gen_design_b(3, 0.2, 0.25).unwrap();
        let p = simulate_var(&m, 200, 100, RngSpec::new(5, 0)).unwrap();
        let pair = banded_autocov(&p, 2).unwrap();
        assert_eq!(pair.sigma0, sample_autocov(&p, 0).unwrap().band(2));
        let full = banded_autocov(&p, p.n_units() - 1).unwrap();
        assert_eq!(full.sigma0, sample_autocov(&p, 0).unwrap());
        let diag = banded_autocov(&p, 0).unwrap();
        for i in 0..p.n_units() {
            for j in 0..p.n_units() {
                if i != j {
                    assert_eq!(diag.sigma0.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn bandwidth_selector_sanity() {
        use crate::model::StModel;
        let n = 8;
        let grid: Vec<usize> = (0..=6).collect();
        // i.i.d. diagonal data: small h should win most of the time
        let mut small_wins = 0;
        for seed in 0..10 {
            let m = StModel::new(Mat::zeros(n, n), Mat::zeros(n, n), Mat::identity(n), 0, 0).unwrap();
            let p = simulate_var(&m, 400, 10, RngSpec::new(seed, 0)).unwrap();
            let h = select_bandwidth(&p, &grid, 30, default_block_len(400), RngSpec::new(seed, 1)).unwrap();
            if h <= 2 {
                small_wins += 1;
            }
        }
        assert!(small_wins >= 9, "small bandwidth selected only {small_wins}/10 times");

        // dense full-band covariance: max h should win
        let mut max_wins = 0;
        for seed in 0..10 {
            let mut sig = Mat::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.9 });
            sig = sig.add(&sig.transpose()).scale(0.5);
            let m = StModel::new(Mat::zeros(n, n), Mat::zeros(n, n), sig, 0, n - 1).unwrap();
            let p = simulate_var(&m, 400, 10, RngSpec::new(100 + seed, 0)).unwrap();
            let h = select_bandwidth(&p, &grid, 30, default_block_len(400), RngSpec::new(seed, 1)).unwrap();
            if h == 6 {
                max_wins += 1;
            }
        }
        assert!(max_wins >= 9, "max bandwidth selected only {max_wins}/10 times");
    }

    #[test]
    fn selector_argument_validation() {
        let p = Panel::with_default_labels(Mat::from_fn(2, 20, |i, t| (i + t) as f64));
        assert!(select_bandwidth(&p, &[0, 1], 0, 3, RngSpec::new(0, 0)).is_err());
        assert!(select_bandwidth(&p, &[], 10, 3, RngSpec::new(0, 0)).is_err());
        assert!(select_bandwidth(&p, &[0], 10, 25, RngSpec::new(0, 0)).is_err());
    }
}
