/* SPDX-License-Identifier: Apache-2.0 */

#ifndef CTCOINT_H
#define CTCOINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_DIMENSION = 2,
  CT_STATUS_DOMAIN = 3,
  CT_STATUS_STABILITY = 4,
  CT_STATUS_NUMERIC = 5,
  CT_STATUS_PARAMETER = 6,
  CT_STATUS_PRECONDITION = 7,
  CT_STATUS_INSUFFICIENT_SAMPLES = 8,
  CT_STATUS_RESOLUTION = 9,
  CT_STATUS_UNSUPPORTED = 10,
  CT_STATUS_RANGE = 11,
  CT_STATUS_CONFIG = 12,
  CT_STATUS_IO = 13,
  CT_STATUS_BUFFER_TOO_SMALL = 14,
  CT_STATUS_PANIC = 15,
} CtStatus;

typedef enum CtVerdict {
  CT_VERDICT_COINTEGRATED_ANALYTIC = 0,
  CT_VERDICT_COINTEGRATED_EMPIRICAL = 1,
  CT_VERDICT_NOT_COINTEGRATED = 2,
  CT_VERDICT_INCONCLUSIVE = 3,
} CtVerdict;

/**
 * Opaque path ensemble.
 */
typedef struct CtEnsemble CtEnsemble;

/**
 * Opaque factor model.
 */
typedef struct CtModel CtModel;

/**
 * Opaque pricing system.
 */
typedef struct CtPricing CtPricing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or an empty string.
 * Valid until the next call into this library on the same thread.
 */
const char *ct_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ct_version(void);

/**
 * `out = exp(m * tau)` for an `n x n` matrix.
 *
 * # Safety
 * `m` and `out` must point to `n * n` doubles.
 */
enum CtStatus ct_mat_exp(const double *m, size_t n, double tau, double *out);

/**
 * Stationary covariance `V` with `C V + V C^T + Q = 0`.
 *
 * # Safety
 * `c`, `q` and `out` must point to `n * n` doubles.
 */
enum CtStatus ct_lyapunov(const double *c, const double *q, size_t n, double *out);

/**
 * `dX = (mu + C X) dt + sigma dW` with `W` Brownian of covariance
 * `driver_cov` (`k x k`, identity when null). A null `x0` starts in the
 * stationary law.
 *
 * # Safety
 * Non-null pointers must reference arrays of the documented sizes
 * (`mu`: n, `c`: n*n, `sigma`: n*k, `driver_cov`: k*k, `x0`: n).
 */
enum CtStatus ct_model_mv_ou(size_t n,
                             size_t k,
                             const double *mu,
                             const double *c,
                             const double *sigma,
                             const double *driver_cov,
                             const double *x0,
                             struct CtModel **out);

/**
 * `dX = mu dt + sigma dW`, `W` standard `k`-dimensional.
 *
 * # Safety
 * `mu` and `x0` must point to `n` doubles, `sigma` to `n * k`.
 */
enum CtStatus ct_model_drifted_bm(size_t n,
                                  size_t k,
                                  const double *mu,
                                  const double *sigma,
                                  const double *x0,
                                  struct CtModel **out);

/**
 * CARMA(p, q) driven by standard Brownian motion. A null `y0` starts in
 * the stationary law.
 *
 * # Safety
 * `alpha` and `y0` must point to `p` doubles, `b` to `q + 1`.
 */
enum CtStatus ct_model_carma(size_t p,
                             size_t q,
                             const double *alpha,
                             const double *b,
                             const double *y0,
                             struct CtModel **out);

/**
 * # Safety
 * `model` must come from a `ct_model_*` constructor or be null.
 */
void ct_model_free(struct CtModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CtStatus ct_model_dim(const struct CtModel *model, size_t *out);

/**
 * Writes the NUL-terminated hex digest into `buf` (65 bytes suffice).
 *
 * # Safety
 * `buf` must point to `cap` writable bytes.
 */
enum CtStatus ct_model_digest(const struct CtModel *model, char *buf, size_t cap);

/**
 * Pricing matrix `p` (`d x n`), optional candidate `c` (length `d`) and
 * optional stationary block size `m`.
 *
 * # Safety
 * `p` must point to `d * n` doubles; non-null `c` to `d`; non-null `m` to
 * one `size_t`.
 */
enum CtStatus ct_pricing_new(size_t d,
                             size_t n,
                             const double *p,
                             const double *c,
                             const size_t *m,
                             struct CtPricing **out);

/**
 * # Safety
 * `sys` must come from [`ct_pricing_new`] or be null.
 */
void ct_pricing_free(struct CtPricing *sys);

/**
 * Simulates `n_paths` paths observed at the increasing `times`.
 *
 * # Safety
 * `model` must be live; `times` must point to `n_times` doubles.
 */
enum CtStatus ct_simulate(const struct CtModel *model,
                          const double *times,
                          size_t n_times,
                          size_t n_paths,
                          uint64_t seed,
                          struct CtEnsemble **out);

/**
 * # Safety
 * `e` must come from [`ct_simulate`] or be null.
 */
void ct_ensemble_free(struct CtEnsemble *e);

/**
 * # Safety
 * `e` must be live; the three outputs must be writable.
 */
enum CtStatus ct_ensemble_shape(const struct CtEnsemble *e,
                                size_t *n_paths,
                                size_t *n_times,
                                size_t *dim);

/**
 * Copies the samples laid out `[path][time][dim]`.
 *
 * # Safety
 * `out` must point to `cap` writable doubles.
 */
enum CtStatus ct_ensemble_values(const struct CtEnsemble *e, double *out, size_t cap);

/**
 * Writes the ensemble CSV (`t,path,x1..xn`) to `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum CtStatus ct_ensemble_write_csv(const struct CtEnsemble *e, const char *path);

/**
 * Cointegration verdict for the pricing system's candidate `c`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtStatus ct_classify(const struct CtModel *model,
                          const struct CtPricing *sys,
                          size_t n_paths,
                          size_t n_boot,
                          uint64_t seed,
                          enum CtVerdict *out);

/**
 * Affine forward curves `out[i * n_x + j] = f_i(t, x_j)` from the state
 * `x_t` of a Gaussian OU or drifted Brownian model.
 *
 * # Safety
 * `x_t` must point to the model dimension, `x_grid` to `n_x`, and `out` to
 * `d * n_x` doubles.
 */
enum CtStatus ct_forward_affine(const struct CtModel *model,
                                const struct CtPricing *sys,
                                const double *x_t,
                                const double *x_grid,
                                size_t n_x,
                                double *out);

/**
 * Filipovic inner product of two curves sampled on the increasing grid
 * `x` (starting at 0) with weight `e^{alpha x}`.
 *
 * # Safety
 * `x`, `f` and `g` must point to `n` doubles; `out` must be writable.
 */
enum CtStatus ct_filipovic_inner(const double *x,
                                 size_t n,
                                 const double *f,
                                 const double *g,
                                 double alpha,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTCOINT_H */
