#ifndef OPTSUB_H
#define OPTSUB_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  OPTSUB_STATUS_OK = 0,
  OPTSUB_STATUS_NULL_POINTER = 1,
  OPTSUB_STATUS_INVALID_ARGUMENT = 2,
  OPTSUB_STATUS_DATA_ERROR = 3,
  OPTSUB_STATUS_NUMERICAL_ERROR = 4,
  OPTSUB_STATUS_BUFFER_TOO_SMALL = 5,
  OPTSUB_STATUS_PANIC = 6,
} OptsubStatus;

typedef enum {
  OPTSUB_FAMILY_OLS = 0,
  OPTSUB_FAMILY_LOGISTIC = 1,
  OPTSUB_FAMILY_POISSON = 2,
  OPTSUB_FAMILY_BINOMIAL = 3,
  OPTSUB_FAMILY_GAMMA = 4,
} OptsubFamily;

typedef enum {
  OPTSUB_SCHEME_WITH_REPLACEMENT = 0,
  OPTSUB_SCHEME_POISSON = 1,
} OptsubScheme;

typedef enum {
  OPTSUB_H_MODE_QUANTILE = 0,
  OPTSUB_H_MODE_INFINITY = 1,
} OptsubHMode;

/**
 * Opaque dataset handle.
 */
typedef struct OptsubDataset OptsubDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `msg` into `buf` (NUL-terminated, truncated to `len`) and returns
 * the full message length excluding the terminator, or 0 if no error is set.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null.
 */
size_t optsub_last_error_message(char *buf, size_t len);

/**
 * Static, NUL-terminated library version.
 */
const char *optsub_version(void);

/**
 * Builds a dataset from `n` rows of `p` covariates stored row-major in `x`
 * and responses `y`. `trials` may be null; otherwise it holds `n` binomial
 * trial counts. On success `*out` owns the handle.
 *
 * # Safety
 * `x` must hold `n * p` values, `y` and (if non-null) `trials` `n` values,
 * and `out` must be writable.
 */
OptsubStatus optsub_dataset_new(const double *x,
                                const double *y,
                                const double *trials,
                                size_t n,
                                size_t p,
                                OptsubDataset **out);

/**
 * Releases a dataset handle. Null is ignored.
 *
 * # Safety
 * `data` must come from [`optsub_dataset_new`] and not be freed twice.
 */
void optsub_dataset_free(OptsubDataset *data);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `data` must be a live handle or null.
 */
size_t optsub_dataset_len(const OptsubDataset *data);

/**
 * Number of covariates, or 0 for a null handle.
 *
 * # Safety
 * `data` must be a live handle or null.
 */
size_t optsub_dataset_dim(const OptsubDataset *data);

/**
 * `pi[i] = t[i] / sum(t)`.
 *
 * # Safety
 * `t` and `pi` must hold `n` values.
 */
OptsubStatus optsub_plan_with_replacement(const double *t, size_t n, double *pi);

/**
 * Poisson plan with expected size `s`. Writes the truncation count to `g`
 * and the threshold to `h` when those are non-null.
 *
 * # Safety
 * `t` and `pi` must hold `n` values; `g` and `h` must be writable or null.
 */
OptsubStatus optsub_plan_poisson(const double *t,
                                 size_t n,
                                 size_t s,
                                 double *pi,
                                 size_t *g,
                                 double *h);

/**
 * `out[i] = (1 - alpha) pi[i] + alpha / n`. `out` may alias `pi`.
 *
 * # Safety
 * `pi` and `out` must hold `n` values.
 */
OptsubStatus optsub_defensive_mix(const double *pi, size_t n, double alpha, double *out);

/**
 * Full-data M-estimate; `theta` must hold `theta_len == dim` values.
 *
 * # Safety
 * `data` must be a live handle and `theta` must hold `theta_len` values.
 */
OptsubStatus optsub_fit_full(const OptsubDataset *data,
                             OptsubFamily fam,
                             double *theta,
                             size_t theta_len);

/**
 * Two-stage subsample estimate: a uniform pilot of size `s0`, a second
 * stage of (expected) size `s` from pilot-estimated optimal probabilities
 * mixed with weight `alpha`, then aggregation. `b` and `h_mode` tune the
 * Poisson threshold. Writes the aggregated estimate (or the second-stage
 * estimate if the two cannot be combined) to `theta`.
 *
 * # Safety
 * `data` must be a live handle and `theta` must hold `theta_len` values.
 */
OptsubStatus optsub_subsample_fit(const OptsubDataset *data,
                                  OptsubFamily fam,
                                  OptsubScheme sch,
                                  size_t s0,
                                  size_t s,
                                  double alpha,
                                  double b,
                                  OptsubHMode h_mode,
                                  uint64_t seed,
                                  double *theta,
                                  size_t theta_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTSUB_H */
