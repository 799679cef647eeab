//! Hyperparameter selection by time-series cross-validation, rolling-window
//! forecasting, and performance metrics (relative forecast error, estimation
//! error, Diebold-Mariano comparisons).

use crate::autocov::{banded_autocov, select_bandwidth};
use crate::benchmarks::{pvar_fit, SupportSet};
use crate::error::{Error, Result};
use crate::linalg::{solve_linear, Mat};
use crate::simulate::{Panel, RngSpec};
use crate::solver;
use crate::yule_walker::{assemble_system, build_layout};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Hyperparameter grid for time-series cross-validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvGrid {
    /// Descending candidate penalty levels.
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub train_frac: f64,
}

pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;

impl CvGrid {
    pub fn new(lambdas: Vec<f64>, alphas: Vec<f64>, train_frac: f64) -> Result<Self> {
        if !(0.0 < train_frac && train_frac < 1.0) {
            return Err(Error::InvalidArgument("train_frac must lie in (0,1)".into()));
        }
        if lambdas.is_empty() || alphas.is_empty() {
            return Err(Error::InvalidArgument("grid must be nonempty".into()));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("lambdas must be descending".into()));
        }
        Ok(CvGrid { lambdas, alphas, train_frac })
    }

    pub fn single(lambda: f64, alpha: f64) -> Self {
        CvGrid {
            lambdas: vec![lambda],
            alphas: vec![alpha],
            train_frac: DEFAULT_TRAIN_FRAC,
        }
    }
}

/// How the banding level for the autocovariance estimates is chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BandwidthMode {
    Fixed(usize),
    Bootstrap { h_grid: Vec<usize>, n_boot: usize, seed: u64 },
}

/// A forecasting method: fits a one-step matrix `C_hat` on a training window.
pub trait Forecaster: Sync {
    fn name(&self) -> &str;
    /// Whether cross-validation over the grid is meaningful for this method.
    fn tunable(&self) -> bool;
    fn fit_c(&self, train: &Panel, lambda: f64, alpha: f64) -> Result<Mat>;
}

/// The penalized generalized Yule-Walker estimator as a forecasting method.
#[derive(Debug, Clone)]
pub struct SplashForecaster {
    pub bandwidth: BandwidthMode,
    /// Admissible bandwidth of the coefficient layout; `None` means the
    /// default `floor(N/4)`.
    pub cap: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub label: String,
}

impl SplashForecaster {
    pub fn new(bandwidth: BandwidthMode, label: impl Into<String>) -> Self {
        SplashForecaster {
            bandwidth,
            cap: None,
            tol: 1e-6,
            max_iter: solver::DEFAULT_MAX_ITER,
            label: label.into(),
        }
    }
}

impl Forecaster for SplashForecaster {
    fn name(&self) -> &str {
        &self.label
    }

    fn tunable(&self) -> bool {
        true
    }

    fn fit_c(&self, train: &Panel, lambda: f64, alpha: f64) -> Result<Mat> {
        let n = train.n_units();
        let cap = self.cap.unwrap_or(n / 4);
        let h = match &self.bandwidth {
            BandwidthMode::Fixed(h) => *h,
            BandwidthMode::Bootstrap { h_grid, n_boot, seed } => {
                let block = crate::autocov::default_block_len(train.n_time());
                select_bandwidth(train, h_grid, *n_boot, block, RngSpec::new(*seed, 0))?
            }
        };
        let acov = banded_autocov(train, h)?;
        let layout = build_layout(n, cap)?;
        let sys = assemble_system(&acov, &layout)?;
        let fit = solver::fit(&sys, lambda, alpha, self.tol, self.max_iter, None)?;
        let i_minus_a = Mat::identity(n).sub(&fit.a_hat);
        solve_linear(&i_minus_a, &fit.b_hat)
    }
}

/// Per-equation Yule-Walker least squares on a fixed support.
#[derive(Debug, Clone)]
pub struct GmwyForecaster {
    pub support: SupportSet,
    pub label: String,
}

impl Forecaster for GmwyForecaster {
    fn name(&self) -> &str {
        &self.label
    }

    fn tunable(&self) -> bool {
        false
    }

    fn fit_c(&self, train: &Panel, _lambda: f64, _alpha: f64) -> Result<Mat> {
        let fit = crate::benchmarks::gmwy_fit(train, &self.support)?;
        let n = train.n_units();
        let i_minus_a = Mat::identity(n).sub(&fit.a_hat);
        solve_linear(&i_minus_a, &fit.b_hat)
    }
}

/// L1-penalized reduced-form VAR.
#[derive(Debug, Clone)]
pub struct PvarForecaster {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PvarForecaster {
    fn default() -> Self {
        PvarForecaster { tol: 1e-6, max_iter: 100_000 }
    }
}

impl Forecaster for PvarForecaster {
    fn name(&self) -> &str {
        "PVAR"
    }

    fn tunable(&self) -> bool {
        true
    }

    fn fit_c(&self, train: &Panel, lambda: f64, _alpha: f64) -> Result<Mat> {
        pvar_fit(train, lambda, self.tol, self.max_iter)
    }
}

/// Window-mean forecaster: on demeaned data its one-step matrix is zero, so
/// the re-added window mean is the forecast.
#[derive(Debug, Clone, Default)]
pub struct ConstForecaster;

impl Forecaster for ConstForecaster {
    fn name(&self) -> &str {
        "CONST"
    }

    fn tunable(&self) -> bool {
        false
    }

    fn fit_c(&self, train: &Panel, _lambda: f64, _alpha: f64) -> Result<Mat> {
        Ok(Mat::zeros(train.n_units(), train.n_units()))
    }
}

/// Mean squared one-step forecast error of `c` over columns `from..t`.
fn validation_score(p: &Panel, c: &Mat, from: usize) -> f64 {
    let n = p.n_units();
    let t = p.n_time();
    let mut acc = 0.0;
    let mut count = 0usize;
    for s in from..t {
        let pred = c.matvec(&p.at(s - 1));
        let y = p.at(s);
        for i in 0..n {
            let e = y[i] - pred[i];
            acc += e * e;
        }
        count += n;
    }
    acc / count as f64
}

/// Choose `(lambda, alpha)` by chronological split: fit on the first
/// `ceil(train_frac * T)` columns, score by mean squared one-step error on
/// the remainder. Ties resolve to the largest lambda, then smallest alpha.
pub fn ts_cross_validate(
    p: &Panel,
    grid: &CvGrid,
    method: &dyn Forecaster,
) -> Result<(f64, f64)> {
    let t = p.n_time();
    let split = (grid.train_frac * t as f64).ceil() as usize;
    if split < 2 || t - split < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {t} time points into segments of >= 2 (train {split})"
        )));
    }
    let train = p.slice_time(0, split);
    let mut best: Option<(f64, f64, f64)> = None; // (score, lambda, alpha)
    for &lam in &grid.lambdas {
        for &alpha in &grid.alphas {
            let c = method.fit_c(&train, lam, alpha)?;
            let score = validation_score(p, &c, split);
            // grid order: lambdas descending, alphas in listed order, so a
            // strict improvement test implements the tie-break
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, lam, alpha));
            }
        }
    }
    let (_, lam, alpha) = best.unwrap();
    Ok((lam, alpha))
}

/// Grid search for the penalized Yule-Walker estimator with the training
/// system assembled once and solutions warm-started down each lambda path.
/// Same split, scoring and tie-breaking as [`ts_cross_validate`], much
/// cheaper on dense grids.
pub fn cv_splash(
    p: &Panel,
    grid: &CvGrid,
    h: usize,
    cap: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let t = p.n_time();
    let split = (grid.train_frac * t as f64).ceil() as usize;
    if split < 2 || t - split < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {t} time points into segments of >= 2 (train {split})"
        )));
    }
    let n = p.n_units();
    let train = p.slice_time(0, split);
    let acov = banded_autocov(&train, h)?;
    let layout = build_layout(n, cap)?;
    let sys = assemble_system(&acov, &layout)?;
    // (score, lambda, alpha index); ties -> largest lambda, then the alpha
    // listed first
    let mut best: Option<(f64, f64, usize)> = None;
    for (ai, &alpha) in grid.alphas.iter().enumerate() {
        let mut warm: Option<Vec<f64>> = None;
        for &lam in &grid.lambdas {
            let fit = crate::solver::fit(&sys, lam, alpha, tol, max_iter, warm.as_deref())?;
            let i_minus_a = Mat::identity(n).sub(&fit.a_hat);
            let c = solve_linear(&i_minus_a, &fit.b_hat)?;
            let score = validation_score(p, &c, split);
            let better = match best {
                None => true,
                Some((s, l, a)) => {
                    score < s || (score == s && (lam > l || (lam == l && ai < a)))
                }
            };
            if better {
                best = Some((score, lam, ai));
            }
            warm = Some(fit.c_hat);
        }
    }
    let (_, lam, ai) = best.unwrap();
    Ok((lam, grid.alphas[ai]))
}

/// Relative mean squared forecast error against the infeasible oracle
/// forecast `C y_T`: `sum_j ||y_{T+1} - C_hat^j y_T||^2 / sum_j ||y_{T+1} - C y_T||^2`.
pub fn rmsfe(fits: &[Mat], truths: &[(Mat, Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if fits.len() != truths.len() || fits.is_empty() {
        return Err(Error::Dimension("need one truth triple per fit".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (c_hat, (c, y_last, y_next)) in fits.iter().zip(truths) {
        let pred = c_hat.matvec(y_last);
        let oracle = c.matvec(y_last);
        for i in 0..y_next.len() {
            num += (y_next[i] - pred[i]).powi(2);
            den += (y_next[i] - oracle[i]).powi(2);
        }
    }
    if den == 0.0 {
        return if num == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::InvalidArgument("oracle errors are exactly zero".into()))
        };
    }
    Ok(num / den)
}

/// Mean spectral-norm deviation of the estimates from the truth.
pub fn estimation_error(est: &[Mat], truth: &Mat) -> Result<f64> {
    if est.is_empty() {
        return Err(Error::InvalidArgument("need at least one estimate".into()));
    }
    let mut acc = 0.0;
    for e in est {
        acc += e.sub(truth).spectral_norm(1e-10, 10_000)?;
    }
    Ok(acc / est.len() as f64)
}

/// Loss applied to forecast errors in the Diebold-Mariano comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DmLoss {
    Squared,
    Absolute,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DmResult {
    pub stat: f64,
    pub p_value: f64,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc_approx(-x / std::f64::consts::SQRT_2)
}

/// Abramowitz-Stegun 7.1.26 rational approximation, |error| <= 1.5e-7.
fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let e = poly * (-z * z).exp();
    if x >= 0.0 {
        e
    } else {
        2.0 - e
    }
}

/// Diebold-Mariano comparison of two forecast error series.
///
/// The loss differential gets a Bartlett-kernel long-run variance with lag
/// `floor(n^{1/3})`; the statistic is compared to a standard normal,
/// two-sided. Degenerate differentials (zero variance) report p = 0 when the
/// mean is nonzero and p = 1 otherwise.
pub fn dm_test(e1: &[f64], e2: &[f64], loss: DmLoss) -> Result<DmResult> {
    let n = e1.len();
    if n != e2.len() {
        return Err(Error::Dimension("error series lengths differ".into()));
    }
    if n < 10 {
        return Err(Error::InvalidArgument("need at least 10 forecast errors".into()));
    }
    let d: Vec<f64> = e1
        .iter()
        .zip(e2)
        .map(|(&a, &b)| match loss {
            DmLoss::Squared => a * a - b * b,
            DmLoss::Absolute => a.abs() - b.abs(),
        })
        .collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let gamma = |k: usize| -> f64 {
        (0..n - k).map(|t| centered[t] * centered[t + k]).sum::<f64>() / nf
    };
    let lag = (nf.powf(1.0 / 3.0)).floor() as usize;
    let mut lrv = gamma(0);
    for k in 1..=lag.min(n - 1) {
        lrv += 2.0 * (1.0 - k as f64 / (lag as f64 + 1.0)) * gamma(k);
    }
    if lrv <= 0.0 || !lrv.is_finite() {
        return Ok(if mean == 0.0 {
            DmResult { stat: 0.0, p_value: 1.0 }
        } else {
            DmResult {
                stat: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
            }
        });
    }
    let stat = mean / (lrv / nf).sqrt();
    let p = 2.0 * (1.0 - normal_cdf(stat.abs()));
    Ok(DmResult { stat, p_value: p.clamp(0.0, 1.0) })
}

/// Forecast errors of one method over a sequence of rolling windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub method: String,
    pub n_units: usize,
    /// One entry per window position; `None` marks an estimator failure.
    pub errors: Vec<Option<Vec<f64>>>,
    /// Window indices whose fit failed.
    pub missing: Vec<usize>,
    pub seconds: f64,
}

impl ForecastRecord {
    /// Error series of one unit over the windows where the fit succeeded.
    pub fn unit_errors(&self, unit: usize) -> Vec<f64> {
        self.errors
            .iter()
            .filter_map(|w| w.as_ref().map(|e| e[unit]))
            .collect()
    }
}

/// Rolling one-step-ahead forecast evaluation.
///
/// Each window: demean per unit, tune on the demeaned window when the method
/// is tunable and the grid has more than one point, fit, forecast one step,
/// re-add the window means. Estimator failures are recorded as missing and
/// the run continues.
pub fn rolling_windows(
    p: &Panel,
    window_frac: f64,
    method: &dyn Forecaster,
    grid: &CvGrid,
) -> Result<ForecastRecord> {
    let t = p.n_time();
    if !(0.0 < window_frac && window_frac < 1.0) {
        return Err(Error::InvalidArgument("window_frac must lie in (0,1)".into()));
    }
    let window = (window_frac * t as f64).ceil() as usize;
    if window < 3 {
        return Err(Error::InvalidArgument("window length must be >= 3".into()));
    }
    if window >= t {
        return Err(Error::InvalidArgument("window leaves no forecasts".into()));
    }
    let n = p.n_units();
    let start = Instant::now();
    let mut errors = Vec::with_capacity(t - window);
    let mut missing = Vec::new();
    for w in 0..t - window {
        let slice = p.slice_time(w, w + window);
        let means: Vec<f64> = (0..n)
            .map(|i| (0..window).map(|s| slice.values.get(i, s)).sum::<f64>() / window as f64)
            .collect();
        let demeaned = Panel {
            values: Mat::from_fn(n, window, |i, s| slice.values.get(i, s) - means[i]),
            unit_labels: p.unit_labels.clone(),
        };
        let fitted = (|| -> Result<Vec<f64>> {
            let (lam, alpha) = if method.tunable() && grid.lambdas.len() * grid.alphas.len() > 1 {
                ts_cross_validate(&demeaned, grid, method)?
            } else {
                (grid.lambdas[0], grid.alphas[0])
            };
            let c = method.fit_c(&demeaned, lam, alpha)?;
            let last = demeaned.at(window - 1);
            let pred = c.matvec(&last);
            Ok((0..n).map(|i| pred[i] + means[i]).collect())
        })();
        match fitted {
            Ok(pred) => {
                let actual = p.at(w + window);
                errors.push(Some((0..n).map(|i| actual[i] - pred[i]).collect()));
            }
            Err(_) => {
                errors.push(None);
                missing.push(w);
            }
        }
    }
    Ok(ForecastRecord {
        method: method.name().to_string(),
        n_units: n,
        errors,
        missing,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One row of the forecast comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    /// Units forecast more accurately than the benchmark (per stated loss).
    pub wins: usize,
    /// Wins where a Diebold-Mariano test rejects at 5%.
    pub significant_wins: usize,
    /// Total loss relative to the benchmark's total loss.
    pub relative_loss: f64,
}

/// Compare each record against the benchmark unit by unit.
pub fn score_table(
    records: &[ForecastRecord],
    benchmark: &ForecastRecord,
    loss: DmLoss,
) -> Result<Vec<ScoreRow>> {
    let n = benchmark.n_units;
    let apply = |e: f64| match loss {
        DmLoss::Squared => e * e,
        DmLoss::Absolute => e.abs(),
    };
    let mut rows = Vec::with_capacity(records.len());
    for rec in records {
        if rec.n_units != n || rec.errors.len() != benchmark.errors.len() {
            return Err(Error::Dimension("records have mismatched shapes".into()));
        }
        let mut wins = 0usize;
        let mut sig = 0usize;
        let mut total = 0.0;
        let mut total_bench = 0.0;
        for unit in 0..n {
            // restrict both series to windows where both methods succeeded
            let mut e_m = Vec::new();
            let mut e_b = Vec::new();
            for (wm, wb) in rec.errors.iter().zip(&benchmark.errors) {
                if let (Some(a), Some(b)) = (wm, wb) {
                    e_m.push(a[unit]);
                    e_b.push(b[unit]);
                }
            }
            if e_m.is_empty() {
                continue;
            }
            let lm: f64 = e_m.iter().map(|&x| apply(x)).sum();
            let lb: f64 = e_b.iter().map(|&x| apply(x)).sum();
            total += lm;
            total_bench += lb;
            if lm < lb {
                wins += 1;
                if e_m.len() >= 10 {
                    let dm = dm_test(&e_m, &e_b, loss)?;
                    if dm.p_value < 0.05 && dm.stat < 0.0 {
                        sig += 1;
                    }
                }
            }
        }
        let relative_loss = if total_bench == 0.0 {
            if total == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            total / total_bench
        };
        rows.push(ScoreRow {
            method: rec.method.clone(),
            wins,
            significant_wins: sig,
            relative_loss,
        });
    }
    Ok(rows)
}
