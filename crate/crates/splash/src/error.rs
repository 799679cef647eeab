use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("matrix is singular or ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("iteration did not converge after {iters} steps (last value {last:.6e})")]
    NoConvergence { iters: usize, last: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unstable model: spectral norm of reduced-form matrix is {0}")]
    Unstable(f64),
    #[error("solver exceeded {max_iter} sweeps (last max change {last_change:.3e}, kkt {kkt:.3e})")]
    SolverMaxIter {
        max_iter: usize,
        last_change: f64,
        kkt: f64,
        last_iterate: Vec<f64>,
    },
    #[error("csv parse error at row {row}, column {col}: {msg}")]
    CsvParse { row: usize, col: usize, msg: String },
    #[error("missing values at cells {0:?}; rerun with --interpolate to fill them")]
    MissingValues(Vec<(usize, usize)>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
