//! C ABI for the splash estimation library.
//!
//! Conventions: all functions return a [`SplashStatus`] or a pointer that is
//! null on failure; objects cross the boundary only as opaque handles; every
//! `*_new` has a matching `*_free`; buffers are caller-allocated and passed
//! with their length, in row-major order.

use splash::autocov::banded_autocov;
use splash::benchmarks::forecast_one_step;
use splash::linalg::Mat;
use splash::simulate::Panel;
use splash::solver;
use splash::yule_walker::{assemble_system, build_layout};

use std::os::raw::c_char;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplashStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
}

/// Opaque panel handle: `n_units` series observed at `n_time` points.
pub struct SplashPanel {
    inner: Panel,
}

/// Opaque fit handle holding the estimated coefficient matrices and
/// diagnostics.
pub struct SplashModelFit {
    a_hat: Mat,
    b_hat: Mat,
    lambda: f64,
    alpha: f64,
    objective: f64,
    n_iter: usize,
    kkt_residual: f64,
}

/// Static description of a status code. Never null; do not free.
#[no_mangle]
pub extern "C" fn splash_status_message(status: SplashStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        SplashStatus::Ok => b"ok\0",
        SplashStatus::NullPointer => b"null pointer argument\0",
        SplashStatus::InvalidArgument => b"invalid argument\0",
        SplashStatus::NumericalFailure => b"numerical failure during estimation\0",
        SplashStatus::BufferTooSmall => b"output buffer too small\0",
    };
    msg.as_ptr() as *const c_char
}

/// Library version as a static string. Never null; do not free.
#[no_mangle]
pub extern "C" fn splash_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a panel from a row-major `n_units x n_time` buffer of finite
/// values. Returns null when the pointer is null, a dimension is zero, or a
/// value is not finite.
///
/// # Safety
/// `values` must point to at least `n_units * n_time` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn splash_panel_new(
    n_units: usize,
    n_time: usize,
    values: *const f64,
) -> *mut SplashPanel {
    if values.is_null() || n_units == 0 || n_time == 0 {
        return std::ptr::null_mut();
    }
    let data = std::slice::from_raw_parts(values, n_units * n_time).to_vec();
    match Mat::new(n_units, n_time, data) {
        Ok(m) => Box::into_raw(Box::new(SplashPanel { inner: Panel::with_default_labels(m) })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// # Safety
/// `panel` must be a handle returned by `splash_panel_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn splash_panel_free(panel: *mut SplashPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Fit the penalized Yule-Walker estimator on a panel: lag-0/lag-1
/// autocovariances banded at `h`, coefficient layout of admissible bandwidth
/// `cap` (must satisfy `cap <= n_units/4`), sparse-group penalty `(alpha,
/// lambda)`. On success writes a fit handle to `out`.
///
/// # Safety
/// `panel` must be a live handle from `splash_panel_new`; `out` must point
/// to writable pointer storage.
#[no_mangle]
pub unsafe extern "C" fn splash_fit(
    panel: *const SplashPanel,
    h: usize,
    cap: usize,
    lambda: f64,
    alpha: f64,
    out: *mut *mut SplashModelFit,
) -> SplashStatus {
    if panel.is_null() || out.is_null() {
        return SplashStatus::NullPointer;
    }
    *out = std::ptr::null_mut();
    if !(0.0..=1.0).contains(&alpha) || !lambda.is_finite() || lambda < 0.0 {
        return SplashStatus::InvalidArgument;
    }
    let p = &(*panel).inner;
    let result = (|| -> splash::Result<SplashModelFit> {
        let acov = banded_autocov(p, h)?;
        let layout = build_layout(p.n_units(), cap)?;
        let sys = assemble_system(&acov, &layout)?;
        let fit = solver::fit(&sys, lambda, alpha, solver::DEFAULT_TOL, solver::DEFAULT_MAX_ITER, None)?;
        Ok(SplashModelFit {
            a_hat: fit.a_hat,
            b_hat: fit.b_hat,
            lambda: fit.lambda,
            alpha: fit.alpha,
            objective: fit.objective,
            n_iter: fit.n_iter,
            kkt_residual: fit.kkt_residual,
        })
    })();
    match result {
        Ok(fit) => {
            *out = Box::into_raw(Box::new(fit));
            SplashStatus::Ok
        }
        Err(splash::Error::InvalidArgument(_)) | Err(splash::Error::Dimension(_)) => {
            SplashStatus::InvalidArgument
        }
        Err(_) => SplashStatus::NumericalFailure,
    }
}

/// # Safety
/// `fit` must be a handle returned by `splash_fit`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_free(fit: *mut SplashModelFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of units of the fitted model (the coefficient matrices are
/// `n x n`).
///
/// # Safety
/// `fit` must be a live handle from `splash_fit`.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_n_units(fit: *const SplashModelFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).a_hat.rows()
}

unsafe fn copy_mat(m: &Mat, buf: *mut f64, len: usize) -> SplashStatus {
    if buf.is_null() {
        return SplashStatus::NullPointer;
    }
    let needed = m.rows() * m.cols();
    if len < needed {
        return SplashStatus::BufferTooSmall;
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            *buf.add(i * m.cols() + j) = m.get(i, j);
        }
    }
    SplashStatus::Ok
}

/// Copy the estimated contemporaneous matrix A (row-major `n x n`) into
/// `buf`.
///
/// # Safety
/// `fit` must be a live handle; `buf` must point to at least `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_get_a(
    fit: *const SplashModelFit,
    buf: *mut f64,
    len: usize,
) -> SplashStatus {
    if fit.is_null() {
        return SplashStatus::NullPointer;
    }
    copy_mat(&(*fit).a_hat, buf, len)
}

/// Copy the estimated temporal matrix B (row-major `n x n`) into `buf`.
///
/// # Safety
/// `fit` must be a live handle; `buf` must point to at least `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_get_b(
    fit: *const SplashModelFit,
    buf: *mut f64,
    len: usize,
) -> SplashStatus {
    if fit.is_null() {
        return SplashStatus::NullPointer;
    }
    copy_mat(&(*fit).b_hat, buf, len)
}

/// Solver diagnostics: penalty level, mixing weight, final objective,
/// iteration count and stationarity residual. Null out-pointers are skipped.
///
/// # Safety
/// `fit` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_diagnostics(
    fit: *const SplashModelFit,
    lambda: *mut f64,
    alpha: *mut f64,
    objective: *mut f64,
    n_iter: *mut usize,
    kkt_residual: *mut f64,
) -> SplashStatus {
    if fit.is_null() {
        return SplashStatus::NullPointer;
    }
    let f = &*fit;
    if !lambda.is_null() {
        *lambda = f.lambda;
    }
    if !alpha.is_null() {
        *alpha = f.alpha;
    }
    if !objective.is_null() {
        *objective = f.objective;
    }
    if !n_iter.is_null() {
        *n_iter = f.n_iter;
    }
    if !kkt_residual.is_null() {
        *kkt_residual = f.kkt_residual;
    }
    SplashStatus::Ok
}

/// One-step forecast `(I - A)^{-1} B y_last` written to `out`.
///
/// # Safety
/// `fit` must be a live handle; `y_last` must point to `n` readable doubles
/// and `out` to `n` writable doubles where `n = splash_fit_n_units(fit)`.
#[no_mangle]
pub unsafe extern "C" fn splash_fit_forecast(
    fit: *const SplashModelFit,
    y_last: *const f64,
    out: *mut f64,
    len: usize,
) -> SplashStatus {
    if fit.is_null() || y_last.is_null() || out.is_null() {
        return SplashStatus::NullPointer;
    }
    let f = &*fit;
    let n = f.a_hat.rows();
    if len < n {
        return SplashStatus::BufferTooSmall;
    }
    let y = std::slice::from_raw_parts(y_last, n);
    match forecast_one_step(&f.a_hat, &f.b_hat, y) {
        Ok(pred) => {
            for (i, v) in pred.iter().enumerate() {
                *out.add(i) = *v;
            }
            SplashStatus::Ok
        }
        Err(_) => SplashStatus::NumericalFailure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_the_c_surface() {
        let n = 8;
        let t = 120;
        // a mildly autocorrelated deterministic panel
        let mut values = vec![0.0_f64; n * t];
        for i in 0..n {
            let mut prev = (i as f64 + 1.0) / 10.0;
            for s in 0..t {
                prev = 0.5 * prev + ((i * 31 + s * 17) as f64).sin() * 0.3;
                values[i * t + s] = prev;
            }
        }
        unsafe {
            let panel = splash_panel_new(n, t, values.as_ptr());
            assert!(!panel.is_null());
            let mut fit: *mut SplashModelFit = std::ptr::null_mut();
            let status = splash_fit(panel, 1, 2, 0.5, 0.5, &mut fit);
            assert_eq!(status, SplashStatus::Ok);
            assert_eq!(splash_fit_n_units(fit), n);
            let mut a = vec![0.0; n * n];
            let mut b = vec![0.0; n * n];
            assert_eq!(splash_fit_get_a(fit, a.as_mut_ptr(), a.len()), SplashStatus::Ok);
            assert_eq!(splash_fit_get_b(fit, b.as_mut_ptr(), b.len()), SplashStatus::Ok);
            assert!(a.iter().chain(&b).all(|x| x.is_finite()));
            // diagonal of A is excluded by construction
            for i in 0..n {
                assert_eq!(a[i * n + i], 0.0);
            }
            let mut lambda = 0.0;
            let mut n_iter = 0usize;
            assert_eq!(
                splash_fit_diagnostics(
                    fit,
                    &mut lambda,
                    std::ptr::null_mut(),
                    std::ptr::null_mut(),
                    &mut n_iter,
                    std::ptr::null_mut()
                ),
                SplashStatus::Ok
            );
            assert_eq!(lambda, 0.5);
            let y_last: Vec<f64> = (0..n).map(|i| values[i * t + t - 1]).collect();
            let mut pred = vec![0.0; n];
            assert_eq!(
                splash_fit_forecast(fit, y_last.as_ptr(), pred.as_mut_ptr(), n),
                SplashStatus::Ok
            );
            assert!(pred.iter().all(|x| x.is_finite()));
            splash_fit_free(fit);
            splash_panel_free(panel);
        }
    }

    #[test]
    fn error_paths() {
        unsafe {
            assert!(splash_panel_new(0, 5, [1.0].as_ptr()).is_null());
            assert!(splash_panel_new(1, 1, std::ptr::null()).is_null());
            let nan = [f64::NAN];
            assert!(splash_panel_new(1, 1, nan.as_ptr()).is_null());

            let mut fit: *mut SplashModelFit = std::ptr::null_mut();
            assert_eq!(
                splash_fit(std::ptr::null(), 1, 1, 0.1, 0.5, &mut fit),
                SplashStatus::NullPointer
            );
            let values: Vec<f64> = (0..8 * 40).map(|k| (k as f64 * 0.7).sin()).collect();
            let panel = splash_panel_new(8, 40, values.as_ptr());
            // alpha outside [0,1]
            assert_eq!(
                splash_fit(panel, 1, 2, 0.1, 1.5, &mut fit),
                SplashStatus::InvalidArgument
            );
            // cap above floor(n/4)
            assert_eq!(
                splash_fit(panel, 1, 5, 0.1, 0.5, &mut fit),
                SplashStatus::InvalidArgument
            );
            // well-formed fit, then a too-small buffer
            assert_eq!(splash_fit(panel, 1, 2, 0.1, 0.5, &mut fit), SplashStatus::Ok);
            let mut small = vec![0.0; 3];
            assert_eq!(
                splash_fit_get_a(fit, small.as_mut_ptr(), small.len()),
                SplashStatus::BufferTooSmall
            );
            splash_fit_free(fit);
            splash_panel_free(panel);
            // frees tolerate null
            splash_fit_free(std::ptr::null_mut());
            splash_panel_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn status_messages_are_static_c_strings() {
        for s in [
            SplashStatus::Ok,
            SplashStatus::NullPointer,
            SplashStatus::InvalidArgument,
            SplashStatus::NumericalFailure,
            SplashStatus::BufferTooSmall,
        ] {
            let ptr = splash_status_message(s);
            assert!(!ptr.is_null());
            let msg = unsafe { std::ffi::CStr::from_ptr(ptr) }.to_str().unwrap();
            assert!(!msg.is_empty());
        }
        let v = unsafe { std::ffi::CStr::from_ptr(splash_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
