/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef PARCS_H
#define PARCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum ParcsStatus {
  PARCS_STATUS_OK = 0,
  PARCS_STATUS_NULL_POINTER = 1,
  PARCS_STATUS_INVALID_INPUT = 2,
  PARCS_STATUS_NO_VARIANCE = 3,
  PARCS_STATUS_NEGATIVE_COUNT = 4,
  PARCS_STATUS_CONFIG = 5,
  PARCS_STATUS_INFEASIBLE_BLOCKS = 6,
  PARCS_STATUS_PARSE = 7,
  PARCS_STATUS_IO = 8,
  PARCS_STATUS_INTERNAL = 9,
  PARCS_STATUS_OUT_OF_RANGE = 10,
  PARCS_STATUS_PANIC = 11,
} ParcsStatus;

/**
 * Detection method selector.
 */
typedef enum ParcsMethod {
  PARCS_METHOD_PARCS = 0,
  PARCS_METHOD_CUSUM = 1,
  PARCS_METHOD_CUSUM_ML = 2,
  PARCS_METHOD_BINSEG = 3,
} ParcsMethod;

/**
 * Opaque detection result.
 */
typedef struct ParcsResult ParcsResult;

/**
 * Opaque multivariate series.
 */
typedef struct ParcsSeries ParcsSeries;

/**
 * Detection options. Fill with [`parcs_detect_options_default`] and adjust.
 *
 * `forward == 0` selects the default forward bound, a NaN `gamma` selects the
 * method's default weighting and `block_size == 0` estimates the block size.
 */
typedef struct ParcsDetectOptions {
  enum ParcsMethod method;
  size_t max_cps;
  size_t forward;
  double gamma;
  size_t max_depth;
  bool sqrt_preprocess;
  double alpha;
  size_t permutations;
  size_t block_size;
  size_t ma_upper_bound;
  double ma_alpha;
  bool shared_permutation;
  uint64_t seed;
} ParcsDetectOptions;

/**
 * One tested change point.
 */
typedef struct ParcsChangePoint {
  /**
   * Number of observations before the jump (the 1-based last index of the old regime).
   */
  size_t location;
  size_t rank;
  double statistic;
  double threshold;
  double p_value;
} ParcsChangePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on the calling thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *parcs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *parcs_version(void);

/**
 * Builds a series from `len * covariates` values stored column by column:
 * covariate `n` occupies `data[n * len .. (n + 1) * len]`.
 *
 * # Safety
 * `data` must point to `len * covariates` readable doubles and `out` must be
 * a valid pointer.
 */
enum ParcsStatus parcs_series_new(const double *data,
                                  size_t len,
                                  size_t covariates,
                                  struct ParcsSeries **out);

/**
 * # Safety
 * `series` must be NULL or a handle from [`parcs_series_new`] not yet freed.
 */
void parcs_series_free(struct ParcsSeries *series);

/**
 * # Safety
 * `series` must be NULL or a valid handle.
 */
size_t parcs_series_len(const struct ParcsSeries *series);

/**
 * # Safety
 * `series` must be NULL or a valid handle.
 */
size_t parcs_series_covariates(const struct ParcsSeries *series);

/**
 * Writes the default options (PARCS with M = 3, 10000 permutations,
 * alpha = 0.05, estimated block size, seed 0).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ParcsStatus parcs_detect_options_default(struct ParcsDetectOptions *out);

/**
 * Runs detection. On success `*out` receives a result handle.
 *
 * # Safety
 * `series` and `options` must be valid; `out` must be a valid pointer.
 */
enum ParcsStatus parcs_detect(const struct ParcsSeries *series,
                              const struct ParcsDetectOptions *options,
                              struct ParcsResult **out);

/**
 * # Safety
 * `result` must be NULL or a handle from [`parcs_detect`] not yet freed.
 */
void parcs_result_free(struct ParcsResult *result);

/**
 * Number of accepted (`accepted == true`) or rejected change points.
 *
 * # Safety
 * `result` must be NULL or a valid handle.
 */
size_t parcs_result_count(const struct ParcsResult *result, bool accepted);

/**
 * Copies change point `index` of the accepted or rejected list into `*out`.
 *
 * # Safety
 * `result` must be a valid handle and `out` a valid pointer.
 */
enum ParcsStatus parcs_result_change_point(const struct ParcsResult *result,
                                           bool accepted,
                                           size_t index,
                                           struct ParcsChangePoint *out);

/**
 * Copies the per-covariate jump estimates of a change point into `buf`.
 * `*written` (if not NULL) receives the number of values required.
 *
 * # Safety
 * `result` must be a valid handle and `buf` must hold `capacity` doubles.
 */
enum ParcsStatus parcs_result_step_weights(const struct ParcsResult *result,
                                           bool accepted,
                                           size_t index,
                                           double *buf,
                                           size_t capacity,
                                           size_t *written);

/**
 * Copies the reconstructed mean of `covariate` into `buf`.
 *
 * # Safety
 * `result` must be a valid handle and `buf` must hold `capacity` doubles.
 */
enum ParcsStatus parcs_result_reconstructed(const struct ParcsResult *result,
                                            size_t covariate,
                                            double *buf,
                                            size_t capacity,
                                            size_t *written);

/**
 * Block length used by the bootstrap.
 *
 * # Safety
 * `result` must be NULL or a valid handle.
 */
size_t parcs_result_block_size(const struct ParcsResult *result);

/**
 * Estimated MA order, or -1 when the block size was fixed.
 *
 * # Safety
 * `result` must be NULL or a valid handle.
 */
int64_t parcs_result_ma_order(const struct ParcsResult *result);

/**
 * The result as a JSON document. The string is owned by the handle.
 *
 * # Safety
 * `result` must be NULL or a valid handle.
 */
const char *parcs_result_json(const struct ParcsResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARCS_H */
