#ifndef SPLASH_H
#define SPLASH_H

/* Generated by cbindgen from splash-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum SplashStatus {
  SPLASH_STATUS_OK = 0,
  SPLASH_STATUS_NULL_POINTER = 1,
  SPLASH_STATUS_INVALID_ARGUMENT = 2,
  SPLASH_STATUS_NUMERICAL_FAILURE = 3,
  SPLASH_STATUS_BUFFER_TOO_SMALL = 4,
} SplashStatus;

/**
 * Opaque fit handle holding the estimated coefficient matrices and
 * diagnostics.
 */
typedef struct SplashModelFit SplashModelFit;

/**
 * Opaque panel handle: `n_units` series observed at `n_time` points.
 */
typedef struct SplashPanel SplashPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null; do not free.
 */
const char *splash_status_message(enum SplashStatus status);

/**
 * Library version as a static string. Never null; do not free.
 */
const char *splash_version(void);

/**
 * Create a panel from a row-major `n_units x n_time` buffer of finite
 * values. Returns null when the pointer is null, a dimension is zero, or a
 * value is not finite.
 *
 * # Safety
 * `values` must point to at least `n_units * n_time` readable doubles.
 */
struct SplashPanel *splash_panel_new(uintptr_t n_units, uintptr_t n_time, const double *values);

/**
 * # Safety
 * `panel` must be a handle returned by `splash_panel_new`, not yet freed.
 */
void splash_panel_free(struct SplashPanel *panel);

/**
 * Fit the penalized Yule-Walker estimator on a panel: lag-0/lag-1
 * autocovariances banded at `h`, coefficient layout of admissible bandwidth
 * `cap` (must satisfy `cap <= n_units/4`), sparse-group penalty `(alpha,
 * lambda)`. On success writes a fit handle to `out`.
 *
 * # Safety
 * `panel` must be a live handle from `splash_panel_new`; `out` must point
 * to writable pointer storage.
 */
enum SplashStatus splash_fit(const struct SplashPanel *panel,
                             uintptr_t h,
                             uintptr_t cap,
                             double lambda,
                             double alpha,
                             struct SplashModelFit **out);

/**
 * # Safety
 * `fit` must be a handle returned by `splash_fit`, not yet freed.
 */
void splash_fit_free(struct SplashModelFit *fit);

/**
 * Number of units of the fitted model (the coefficient matrices are
 * `n x n`).
 *
 * # Safety
 * `fit` must be a live handle from `splash_fit`.
 */
uintptr_t splash_fit_n_units(const struct SplashModelFit *fit);

/**
 * Copy the estimated contemporaneous matrix A (row-major `n x n`) into
 * `buf`.
 *
 * # Safety
 * `fit` must be a live handle; `buf` must point to at least `len` writable
 * doubles.
 */
enum SplashStatus splash_fit_get_a(const struct SplashModelFit *fit, double *buf, uintptr_t len);

/**
 * Copy the estimated temporal matrix B (row-major `n x n`) into `buf`.
 *
 * # Safety
 * `fit` must be a live handle; `buf` must point to at least `len` writable
 * doubles.
 */
enum SplashStatus splash_fit_get_b(const struct SplashModelFit *fit, double *buf, uintptr_t len);

/**
 * Solver diagnostics: penalty level, mixing weight, final objective,
 * iteration count and stationarity residual. Null out-pointers are skipped.
 *
 * # Safety
 * `fit` must be a live handle; non-null out-pointers must be writable.
 */
enum SplashStatus splash_fit_diagnostics(const struct SplashModelFit *fit,
                                         double *lambda,
                                         double *alpha,
                                         double *objective,
                                         uintptr_t *n_iter,
                                         double *kkt_residual);

/**
 * One-step forecast `(I - A)^{-1} B y_last` written to `out`.
 *
 * # Safety
 * `fit` must be a live handle; `y_last` must point to `n` readable doubles
 * and `out` to `n` writable doubles where `n = splash_fit_n_units(fit)`.
 */
enum SplashStatus splash_fit_forecast(const struct SplashModelFit *fit,
                                      const double *y_last,
                                      double *out,
                                      uintptr_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPLASH_H */
