//! Run configuration: defaults, key-value config files, and flag overrides.

use crate::error::{Error, Result};
use crate::eval::{DmLoss, DEFAULT_ALPHAS, DEFAULT_TRAIN_FRAC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    A,
    B,
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Design::A),
            "B" => Ok(Design::B),
            other => Err(Error::InvalidArgument(format!("design must be A or B, got {other}"))),
        }
    }
}

/// Fully resolved parameters of a command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub design: Design,
    /// Design A panel dimension.
    pub n: usize,
    /// Design A coefficient bandwidth.
    pub k0: usize,
    /// Design B grid side (N = m^2).
    pub m: usize,
    /// Design B spatial interaction strength.
    pub interaction: f64,
    /// Design B temporal diagonal.
    pub b_diag: f64,
    pub t: usize,
    pub reps: usize,
    pub seed: u64,
    /// "fixed" or "bootstrap".
    pub bandwidth: String,
    /// Banding level when `bandwidth = fixed`; `None` means the design's
    /// coefficient bandwidth (k0 for A, m for B) or, on external panels, 1.
    pub h: Option<usize>,
    pub n_boot: usize,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub alphas: Vec<f64>,
    /// Admissible layout bandwidth; `None` means floor(N/4).
    pub cap: Option<usize>,
    pub estimators: Vec<String>,
    pub window_frac: f64,
    pub train_frac: f64,
    pub loss: DmLoss,
    pub interpolate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            design: Design::B,
            n: 25,
            k0: 3,
            m: 5,
            interaction: 0.2,
            b_diag: 0.25,
            t: 1000,
            reps: 50,
            seed: 1,
            bandwidth: "fixed".into(),
            h: None,
            n_boot: crate::autocov::DEFAULT_N_BOOT,
            n_lambda: 20,
            lambda_ratio: 1e-3,
            alphas: DEFAULT_ALPHAS.to_vec(),
            cap: None,
            estimators: vec![
                "splash0".into(),
                "splash".into(),
                "pvar".into(),
                "gmwy".into(),
                "const".into(),
            ],
            window_frac: 0.8,
            train_frac: DEFAULT_TRAIN_FRAC,
            loss: DmLoss::Squared,
            interpolate: false,
        }
    }
}

const KNOWN_ESTIMATORS: [&str; 6] = ["splash0", "splash", "pvar", "gmwy", "gmwy-oracle", "const"];

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: &str| -> Error {
            Error::InvalidArgument(format!("{name}: {msg}"))
        };
        if self.t < 2 {
            return Err(field("t", "need at least 2 time points"));
        }
        if self.reps == 0 {
            return Err(field("reps", "must be >= 1"));
        }
        if self.bandwidth != "fixed" && self.bandwidth != "bootstrap" {
            return Err(field("bandwidth", "must be 'fixed' or 'bootstrap'"));
        }
        if self.bandwidth == "bootstrap" && self.n_boot < 2 {
            return Err(field("n_boot", "must be >= 2 when bandwidth = bootstrap"));
        }
        if self.n_lambda == 0 {
            return Err(field("n_lambda", "must be >= 1"));
        }
        if !(0.0 < self.lambda_ratio && self.lambda_ratio <= 1.0) {
            return Err(field("lambda_ratio", "must lie in (0, 1]"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(field("alphas", "must be a nonempty list within [0, 1]"));
        }
        if !(0.0 < self.window_frac && self.window_frac < 1.0) {
            return Err(field("window_frac", "must lie in (0, 1)"));
        }
        if !(0.0 < self.train_frac && self.train_frac < 1.0) {
            return Err(field("train_frac", "must lie in (0, 1)"));
        }
        for e in &self.estimators {
            if !KNOWN_ESTIMATORS.contains(&e.as_str()) {
                return Err(field(
                    "estimators",
                    &format!("unknown estimator '{e}' (known: {})", KNOWN_ESTIMATORS.join(", ")),
                ));
            }
        }
        Ok(())
    }

    /// Parse a key-value config text (`key = value` per line, `#` comments)
    /// over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Apply one key-value override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |key: &str, value: &str| -> Error {
            Error::InvalidArgument(format!("config key {key}: cannot parse '{value}'"))
        };
        match key {
            "design" => self.design = value.parse()?,
            "n" => self.n = value.parse().map_err(|_| bad(key, value))?,
            "k0" => self.k0 = value.parse().map_err(|_| bad(key, value))?,
            "m" => self.m = value.parse().map_err(|_| bad(key, value))?,
            "interaction" => self.interaction = value.parse().map_err(|_| bad(key, value))?,
            "b_diag" => self.b_diag = value.parse().map_err(|_| bad(key, value))?,
            "t" => self.t = value.parse().map_err(|_| bad(key, value))?,
            "reps" => self.reps = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "bandwidth" => self.bandwidth = value.to_string(),
            "h" => {
                self.h = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key, value))?)
                }
            }
            "n_boot" => self.n_boot = value.parse().map_err(|_| bad(key, value))?,
            "n_lambda" => self.n_lambda = value.parse().map_err(|_| bad(key, value))?,
            "lambda_ratio" => self.lambda_ratio = value.parse().map_err(|_| bad(key, value))?,
            "alphas" => {
                self.alphas = value
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| bad(key, value)))
                    .collect::<Result<Vec<f64>>>()?
            }
            "cap" => {
                self.cap = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key, value))?)
                }
            }
            "estimators" => {
                self.estimators = value.split(',').map(|x| x.trim().to_string()).collect()
            }
            "window_frac" => self.window_frac = value.parse().map_err(|_| bad(key, value))?,
            "train_frac" => self.train_frac = value.parse().map_err(|_| bad(key, value))?,
            "loss" => {
                self.loss = match value {
                    "squared" => DmLoss::Squared,
                    "absolute" => DmLoss::Absolute,
                    _ => return Err(bad(key, value)),
                }
            }
            "interpolate" => self.interpolate = value.parse().map_err(|_| bad(key, value))?,
            other => {
                return Err(Error::InvalidArgument(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Canonical key-value text; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let opt = |v: &Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
        let list_f = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "design = {:?}\nn = {}\nk0 = {}\nm = {}\ninteraction = {}\nb_diag = {}\nt = {}\n\
             reps = {}\nseed = {}\nbandwidth = {}\nh = {}\nn_boot = {}\nn_lambda = {}\n\
             lambda_ratio = {}\nalphas = {}\ncap = {}\nestimators = {}\nwindow_frac = {}\n\
             train_frac = {}\nloss = {}\ninterpolate = {}\n",
            self.design,
            self.n,
            self.k0,
            self.m,
            self.interaction,
            self.b_diag,
            self.t,
            self.reps,
            self.seed,
            self.bandwidth,
            opt(&self.h),
            self.n_boot,
            self.n_lambda,
            self.lambda_ratio,
            list_f(&self.alphas),
            opt(&self.cap),
            self.estimators.join(","),
            self.window_frac,
            self.train_frac,
            match self.loss {
                DmLoss::Squared => "squared",
                DmLoss::Absolute => "absolute",
            },
            self.interpolate,
        )
    }
}
