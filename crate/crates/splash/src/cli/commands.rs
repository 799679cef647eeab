//! Command implementations. Each `run_*` function does the work and returns
//! serializable results; the thin `cmd_*` wrappers write the output files.

use crate::autocov::banded_autocov;
use crate::benchmarks::{gmwy_fit, SupportSet};
use crate::cli::config::{Design, RunConfig};
use crate::cli::panel_io::{panel_to_csv, parse_panel_csv};
use crate::error::{Error, Result};
use crate::eval::{
    cv_splash, estimation_error, rmsfe, rolling_windows, score_table, ts_cross_validate,
    BandwidthMode, ConstForecaster, CvGrid, ForecastRecord, Forecaster, GmwyForecaster,
    PvarForecaster, ScoreRow, SplashForecaster,
};
use crate::linalg::{solve_linear, Mat};
use crate::model::{reduced_form, StModel};
use crate::simulate::{gen_design_a, gen_design_b, simulate_var, Panel, RngSpec, DEFAULT_BURN_IN};
use crate::solver::{self, SplashFit};
use crate::yule_walker::{assemble_system, build_layout, CoeffMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Stream id offset reserved for model generation so replicate streams
/// (one per rep) never collide with it.
const MODEL_STREAM: u64 = 1_000_000;

fn build_model(cfg: &RunConfig) -> Result<StModel> {
    match cfg.design {
        Design::A => gen_design_a(cfg.n, cfg.k0, RngSpec::new(cfg.seed, MODEL_STREAM), 500),
        Design::B => gen_design_b(cfg.m, cfg.interaction, cfg.b_diag),
    }
}

/// Fixed banding level: the configured override, else the design's
/// coefficient bandwidth (k0 for A, m for B).
fn design_h(cfg: &RunConfig) -> usize {
    cfg.h.unwrap_or(match cfg.design {
        Design::A => cfg.k0,
        Design::B => cfg.m,
    })
}

fn bandwidth_mode(cfg: &RunConfig, h_default: usize, n: usize) -> BandwidthMode {
    if cfg.bandwidth == "bootstrap" {
        BandwidthMode::Bootstrap {
            h_grid: (0..n).collect(),
            n_boot: cfg.n_boot,
            seed: cfg.seed,
        }
    } else {
        BandwidthMode::Fixed(h_default)
    }
}

/// Lambda grid for the penalized Yule-Walker estimator, anchored at the
/// largest lambda-max over the configured alpha values.
fn splash_lambda_grid(p: &Panel, h: usize, cap: usize, cfg: &RunConfig, alphas: &[f64]) -> Result<CvGrid> {
    let acov = banded_autocov(p, h)?;
    let layout = build_layout(p.n_units(), cap)?;
    let sys = assemble_system(&acov, &layout)?;
    let mut lmax = 0.0_f64;
    for &a in alphas {
        lmax = lmax.max(solver::lambda_max(&sys, a)?);
    }
    let lambdas = solver::lambda_path(lmax, cfg.n_lambda, cfg.lambda_ratio)?;
    CvGrid::new(lambdas, alphas.to_vec(), cfg.train_frac)
}

/// Largest penalty with an all-zero L1-penalized VAR fit: the coordinate
/// update `soft(cross_ij, lambda/2)` vanishes iff `lambda >= 2 |cross_ij|`.
fn pvar_lambda_max(p: &Panel) -> f64 {
    let n = p.n_units();
    let t = p.n_time();
    let mut max_cross = 0.0_f64;
    let mut cross = Mat::zeros(n, n);
    for s in 1..t {
        let y = p.at(s);
        let x = p.at(s - 1);
        for i in 0..n {
            for j in 0..n {
                cross.set(i, j, cross.get(i, j) + y[i] * x[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            max_cross = max_cross.max(cross.get(i, j).abs());
        }
    }
    2.0 * max_cross
}

fn pvar_grid(p: &Panel, cfg: &RunConfig) -> Result<CvGrid> {
    let lambdas = solver::lambda_path(pvar_lambda_max(p), cfg.n_lambda, cfg.lambda_ratio)?;
    CvGrid::new(lambdas, vec![0.0], cfg.train_frac)
}

fn demean(p: &Panel) -> (Panel, Vec<f64>) {
    let n = p.n_units();
    let t = p.n_time();
    let means: Vec<f64> =
        (0..n).map(|i| (0..t).map(|s| p.values.get(i, s)).sum::<f64>() / t as f64).collect();
    let demeaned = Panel {
        values: Mat::from_fn(n, t, |i, s| p.values.get(i, s) - means[i]),
        unit_labels: p.unit_labels.clone(),
    };
    (demeaned, means)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub n_units: usize,
    pub a: Mat,
    pub b: Mat,
    pub sigma_eps: Mat,
    pub bandwidth_k: usize,
    pub spectral_norm_c: f64,
}

pub fn run_simulate(cfg: &RunConfig) -> Result<(Panel, TruthReport)> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let rf = reduced_form(&model)?;
    let panel = simulate_var(&model, cfg.t, DEFAULT_BURN_IN, RngSpec::new(cfg.seed, 0))?;
    let report = TruthReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        n_units: model.n_units(),
        a: model.a.clone(),
        b: model.b.clone(),
        sigma_eps: model.sigma_eps.clone(),
        bandwidth_k: model.bandwidth_k,
        spectral_norm_c: rf.c.spectral_norm_default()?,
    };
    Ok((panel, report))
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (panel, report) = run_simulate(cfg)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("panel.csv"), panel_to_csv(&panel))?;
    std::fs::write(out.join("truth.json"), to_json(&report)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub matrix: CoeffMatrix,
    pub diagonal: usize,
    pub n_members: usize,
    pub mean_abs: f64,
    pub nonzero: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub n_units: usize,
    pub h: usize,
    pub cap: usize,
    pub unit_means: Vec<f64>,
    pub fit: SplashFit,
    pub group_summary: Vec<GroupSummary>,
}

pub fn run_estimate(cfg: &RunConfig, panel: &Panel) -> Result<FitReport> {
    cfg.validate()?;
    let n = panel.n_units();
    let cap = cfg.cap.unwrap_or(n / 4);
    if cap == 0 {
        return Err(Error::InvalidArgument("panel too small: cap would be 0".into()));
    }
    let (centered, unit_means) = demean(panel);
    // resolve the banding level once so tuning and the final fit agree
    let h = match bandwidth_mode(cfg, design_h(cfg).min(cap), n) {
        BandwidthMode::Fixed(h) => h,
        BandwidthMode::Bootstrap { h_grid, n_boot, seed } => {
            let block = crate::autocov::default_block_len(centered.n_time());
            crate::autocov::select_bandwidth(&centered, &h_grid, n_boot, block, RngSpec::new(seed, 0))?
        }
    };
    let grid = splash_lambda_grid(&centered, h, cap, cfg, &cfg.alphas)?;
    let (lambda, alpha) = if grid.lambdas.len() * grid.alphas.len() > 1 {
        cv_splash(&centered, &grid, h, cap, 1e-5, solver::DEFAULT_MAX_ITER)?
    } else {
        (grid.lambdas[0], grid.alphas[0])
    };
    let acov = banded_autocov(&centered, h)?;
    let layout = build_layout(n, cap)?;
    let sys = assemble_system(&acov, &layout)?;
    let fit = solver::fit(&sys, lambda, alpha, 1e-6, solver::DEFAULT_MAX_ITER, None)?;
    let group_summary = layout
        .groups
        .iter()
        .map(|g| {
            let abs: Vec<f64> = g.members.iter().map(|&p| fit.c_hat[p].abs()).collect();
            let mean_abs = if abs.is_empty() { 0.0 } else { abs.iter().sum::<f64>() / abs.len() as f64 };
            GroupSummary {
                matrix: g.matrix,
                diagonal: g.diagonal,
                n_members: g.members.len(),
                mean_abs,
                nonzero: abs.iter().any(|&x| x != 0.0),
            }
        })
        .collect();
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        n_units: n,
        h,
        cap,
        unit_means,
        fit,
        group_summary,
    })
}

pub fn cmd_estimate(cfg: &RunConfig, panel_file: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(panel_file)?;
    let panel = parse_panel_csv(&text, cfg.interpolate)?;
    let report = run_estimate(cfg, &panel)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("fit.json"), to_json(&report)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// replicate

struct RepFit {
    c_hat: Mat,
    a_hat: Option<Mat>,
    b_hat: Option<Mat>,
}

fn fit_estimator(
    name: &str,
    train: &Panel,
    cfg: &RunConfig,
    model: &StModel,
    h: usize,
    cap: usize,
) -> Result<RepFit> {
    let n = train.n_units();
    let structural = |a_hat: Mat, b_hat: Mat| -> Result<RepFit> {
        let i_minus_a = Mat::identity(n).sub(&a_hat);
        let c_hat = solve_linear(&i_minus_a, &b_hat)?;
        Ok(RepFit { c_hat, a_hat: Some(a_hat), b_hat: Some(b_hat) })
    };
    match name {
        "splash0" | "splash" => {
            let alphas: Vec<f64> = if name == "splash0" { vec![0.0] } else { cfg.alphas.clone() };
            let grid = splash_lambda_grid(train, h, cap, cfg, &alphas)?;
            let (lambda, alpha) = if grid.lambdas.len() * grid.alphas.len() > 1 {
                cv_splash(train, &grid, h, cap, 1e-5, solver::DEFAULT_MAX_ITER)?
            } else {
                (grid.lambdas[0], grid.alphas[0])
            };
            let acov = banded_autocov(train, h)?;
            let layout = build_layout(n, cap)?;
            let sys = assemble_system(&acov, &layout)?;
            let fit = solver::fit(&sys, lambda, alpha, 1e-6, solver::DEFAULT_MAX_ITER, None)?;
            structural(fit.a_hat, fit.b_hat)
        }
        "pvar" => {
            let grid = pvar_grid(train, cfg)?;
            let method = PvarForecaster::default();
            let (lambda, _) = ts_cross_validate(train, &grid, &method)?;
            let c_hat = method.fit_c(train, lambda, 0.0)?;
            Ok(RepFit { c_hat, a_hat: None, b_hat: None })
        }
        "gmwy" => {
            let support = SupportSet::band(n, design_h(cfg));
            let f = gmwy_fit(train, &support)?;
            structural(f.a_hat, f.b_hat)
        }
        "gmwy-oracle" => {
            let support = SupportSet::from_matrices(&model.a, &model.b);
            let f = gmwy_fit(train, &support)?;
            structural(f.a_hat, f.b_hat)
        }
        "const" => Ok(RepFit { c_hat: Mat::zeros(n, n), a_hat: None, b_hat: None }),
        other => Err(Error::InvalidArgument(format!("unknown estimator '{other}'"))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub n_reps_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub rows: Vec<TableRow>,
    /// Failed (estimator, rep) pairs, by estimator.
    pub exclusions: Vec<(String, usize)>,
}

impl ReplicateReport {
    pub fn value(&self, method: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,value,n_reps_used\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.method, r.metric, r.value, r.n_reps_used));
        }
        out
    }
}

pub fn run_replicate(cfg: &RunConfig) -> Result<ReplicateReport> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let rf = reduced_form(&model)?;
    let n = model.n_units();
    let cap = cfg.cap.unwrap_or(n / 4);
    let h_fixed = design_h(cfg).min(n - 1);
    let bootstrap = cfg.bandwidth == "bootstrap";
    let h_grid: Vec<usize> = (0..n).collect();
    let estimators = cfg.estimators.clone();
    // one rep = simulate T+1 points, fit every estimator on the first T,
    // forecast the last; collected in rep order so aggregation is
    // deterministic regardless of scheduling
    let reps: Vec<(Vec<Result<RepFit>>, Vec<f64>, Vec<f64>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let panel =
                simulate_var(&model, cfg.t + 1, DEFAULT_BURN_IN, RngSpec::new(cfg.seed, r as u64))
                    .expect("simulation of a validated model cannot fail");
            let train = panel.slice_time(0, cfg.t);
            let y_last = panel.at(cfg.t - 1);
            let y_next = panel.at(cfg.t);
            let h = if bootstrap {
                let block = crate::autocov::default_block_len(cfg.t);
                crate::autocov::select_bandwidth(
                    &train,
                    &h_grid,
                    cfg.n_boot,
                    block,
                    RngSpec::new(cfg.seed, MODEL_STREAM + 1 + r as u64),
                )
                .expect("bandwidth selection on a simulated panel cannot fail")
            } else {
                h_fixed
            };
            let fits: Vec<Result<RepFit>> = estimators
                .iter()
                .map(|name| fit_estimator(name, &train, cfg, &model, h, cap))
                .collect();
            (fits, y_last, y_next)
        })
        .collect();
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for (e_idx, name) in estimators.iter().enumerate() {
        let mut c_fits = Vec::new();
        let mut truths = Vec::new();
        let mut a_fits = Vec::new();
        let mut b_fits = Vec::new();
        let mut failed = 0usize;
        for (fits, y_last, y_next) in &reps {
            match &fits[e_idx] {
                Ok(f) => {
                    c_fits.push(f.c_hat.clone());
                    truths.push((rf.c.clone(), y_last.clone(), y_next.clone()));
                    if let (Some(a), Some(b)) = (&f.a_hat, &f.b_hat) {
                        a_fits.push(a.clone());
                        b_fits.push(b.clone());
                    }
                }
                Err(_) => failed += 1,
            }
        }
        if failed > 0 {
            exclusions.push((name.clone(), failed));
        }
        let used = c_fits.len();
        if used == 0 {
            continue;
        }
        rows.push(TableRow {
            method: name.clone(),
            metric: "RMSFE".into(),
            value: rmsfe(&c_fits, &truths)?,
            n_reps_used: used,
        });
        if !a_fits.is_empty() {
            rows.push(TableRow {
                method: name.clone(),
                metric: "EE_A".into(),
                value: estimation_error(&a_fits, &model.a)?,
                n_reps_used: used,
            });
            rows.push(TableRow {
                method: name.clone(),
                metric: "EE_B".into(),
                value: estimation_error(&b_fits, &model.b)?,
                n_reps_used: used,
            });
        }
    }
    Ok(ReplicateReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        rows,
        exclusions,
    })
}

pub fn cmd_replicate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let report = run_replicate(cfg)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("table.json"), to_json(&report)?)?;
    std::fs::write(out.join("table.csv"), report.to_csv())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// forecast-eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastEvalReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub benchmark: String,
    pub n_windows: usize,
    pub rows: Vec<ScoreRow>,
    pub records: Vec<ForecastRecord>,
}

impl ForecastEvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,wins,significant_wins,relative_loss\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.method, r.wins, r.significant_wins, r.relative_loss
            ));
        }
        out
    }
}

pub fn run_forecast_eval(cfg: &RunConfig, panel: &Panel) -> Result<ForecastEvalReport> {
    cfg.validate()?;
    let n = panel.n_units();
    let cap = cfg.cap.unwrap_or(n / 4).max(1);
    let h = design_h(cfg).min(cap);
    let single = CvGrid::single(0.0, 0.0);
    let mut records = Vec::new();
    let bench_record = {
        let grid = pvar_grid(panel, cfg)?;
        rolling_windows(panel, cfg.window_frac, &PvarForecaster::default(), &grid)?
    };
    for name in &cfg.estimators {
        if name == "pvar" {
            continue; // always present as the benchmark
        }
        let rec = match name.as_str() {
            "splash0" | "splash" => {
                let alphas: Vec<f64> =
                    if name == "splash0" { vec![0.0] } else { cfg.alphas.clone() };
                let grid = splash_lambda_grid(panel, h, cap, cfg, &alphas)?;
                let mut method = SplashForecaster::new(BandwidthMode::Fixed(h), name.clone());
                method.cap = Some(cap);
                rolling_windows(panel, cfg.window_frac, &method, &grid)?
            }
            "gmwy" => {
                let method = GmwyForecaster {
                    support: SupportSet::band(n, design_h(cfg)),
                    label: name.clone(),
                };
                rolling_windows(panel, cfg.window_frac, &method, &single)?
            }
            "gmwy-oracle" => {
                return Err(Error::InvalidArgument(
                    "gmwy-oracle needs a known model; it is unavailable on external panels".into(),
                ))
            }
            "const" => rolling_windows(panel, cfg.window_frac, &ConstForecaster, &single)?,
            other => {
                return Err(Error::InvalidArgument(format!("unknown estimator '{other}'")));
            }
        };
        records.push(rec);
    }
    let rows = score_table(&records, &bench_record, cfg.loss)?;
    let n_windows = bench_record.errors.len();
    records.push(bench_record);
    Ok(ForecastEvalReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        benchmark: "PVAR".into(),
        n_windows,
        rows,
        records,
    })
}

pub fn cmd_forecast_eval(cfg: &RunConfig, panel_file: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(panel_file)?;
    let panel = parse_panel_csv(&text, cfg.interpolate)?;
    let report = run_forecast_eval(cfg, &panel)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("forecast_table.json"), to_json(&report)?)?;
    std::fs::write(out.join("forecast_table.csv"), report.to_csv())?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_stability;

    fn tiny_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.design = Design::B;
        cfg.m = 3;
        cfg.t = 80;
        cfg.h = Some(1);
        cfg.reps = 2;
        cfg.n_lambda = 4;
        cfg.alphas = vec![0.0];
        cfg.estimators = vec!["splash0".into(), "pvar".into(), "gmwy".into(), "const".into()];
        cfg
    }

    #[test]
    fn simulate_truth_passes_model_invariants() {
        let mut cfg = RunConfig::default();
        cfg.design = Design::A;
        cfg.n = 25;
        cfg.k0 = 3;
        cfg.t = 50;
        let (panel, truth) = run_simulate(&cfg).unwrap();
        assert_eq!(panel.n_units(), 25);
        assert_eq!(panel.n_time(), 50);
        let model = StModel::new(
            truth.a.clone(),
            truth.b.clone(),
            truth.sigma_eps.clone(),
            truth.bandwidth_k,
            0,
        )
        .unwrap();
        let spectral = check_stability(&model, 0.9).unwrap().spectral_c.unwrap();
        assert!(spectral <= 0.95);
    }

    #[test]
    fn simulate_deterministic() {
        let cfg = tiny_cfg();
        let (p1, t1) = run_simulate(&cfg).unwrap();
        let (p2, t2) = run_simulate(&cfg).unwrap();
        assert_eq!(p1.values, p2.values);
        assert_eq!(to_json(&t1).unwrap(), to_json(&t2).unwrap());
    }

    #[test]
    fn simulate_t1_is_usage_error() {
        let mut cfg = tiny_cfg();
        cfg.t = 1;
        let msg = run_simulate(&cfg).unwrap_err().to_string();
        assert!(msg.contains("t:"), "message was: {msg}");
    }

    #[test]
    fn estimate_zero_panel_is_zero_fit() {
        let mut cfg = tiny_cfg();
        cfg.n_lambda = 3;
        let panel = Panel::with_default_labels(Mat::zeros(9, 60));
        let report = run_estimate(&cfg, &panel).unwrap();
        assert!(report.fit.c_hat.iter().all(|&x| x == 0.0));
        assert!(report.group_summary.iter().all(|g| !g.nonzero));
    }

    #[test]
    fn replicate_table_shape_and_determinism() {
        let cfg = tiny_cfg();
        let rep1 = run_replicate(&cfg).unwrap();
        let rep2 = run_replicate(&cfg).unwrap();
        assert_eq!(to_json(&rep1).unwrap(), to_json(&rep2).unwrap());
        // RMSFE for all four methods; EE rows only for structural ones
        for m in ["splash0", "pvar", "gmwy", "const"] {
            assert!(rep1.value(m, "RMSFE").is_some(), "missing RMSFE for {m}");
        }
        for m in ["splash0", "gmwy"] {
            assert!(rep1.value(m, "EE_A").is_some());
            assert!(rep1.value(m, "EE_B").is_some());
        }
        assert!(rep1.value("pvar", "EE_A").is_none());
        assert!(rep1.exclusions.is_empty());
    }

    #[test]
    fn forecast_eval_single_window() {
        let mut cfg = tiny_cfg();
        cfg.estimators = vec!["const".into()];
        cfg.n_lambda = 3;
        let (panel, _) = run_simulate(&cfg).unwrap();
        // ceil(79/80 * 80) = 79 leaves exactly one forecast
        cfg.window_frac = 79.0 / 80.0;
        let report = run_forecast_eval(&cfg, &panel).unwrap();
        assert_eq!(report.n_windows, 1);
        for rec in &report.records {
            assert_eq!(rec.errors.len(), 1);
        }
    }

    #[test]
    fn forecast_eval_rejects_oracle_method() {
        let mut cfg = tiny_cfg();
        cfg.estimators = vec!["gmwy-oracle".into()];
        let (panel, _) = run_simulate(&cfg).unwrap();
        assert!(run_forecast_eval(&cfg, &panel).is_err());
    }
}
