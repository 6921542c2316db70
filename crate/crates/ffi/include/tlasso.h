#ifndef TLASSO_H
#define TLASSO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  /**
   * Bad link, set, spec, shape or parameter.
   */
  TL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Anchor outside the requested set, or another configuration problem.
   */
  TL_STATUS_CONFIG = 3,
  TL_STATUS_NUMERICAL_FAILURE = 4,
  TL_STATUS_NOT_SUB_GAUSSIAN = 5,
  TL_STATUS_IO = 6,
  /**
   * An output buffer is shorter than the data to copy.
   */
  TL_STATUS_BUFFER_TOO_SMALL = 7,
  TL_STATUS_PANIC = 8,
} TlStatus;

/**
 * Opaque problem instance.
 */
typedef struct TlInstance TlInstance;

/**
 * Opaque solver output.
 */
typedef struct TlSolveResult TlSolveResult;

typedef struct TlParams {
  double mu;
  double sigma;
  double psi_hat;
} TlParams;

typedef struct TlSolveSummary {
  size_t iterations;
  bool converged;
  double final_residual_norm;
  double grad_map_norm;
} TlSolveSummary;

typedef struct TlEstimate {
  double mean;
  double std_error;
} TlEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *tl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tl_version(void);

/**
 * μ, σ and ψ̂ of a link given in the text grammar (`sign`, `clip:1`, ...).
 * `order` 0 selects the default quadrature order.
 *
 * # Safety
 * `link` must be a NUL-terminated string and `out_params` a valid pointer.
 */
enum TlStatus tl_link_params(const char *link, size_t order, struct TlParams *out_params);

/**
 * Draws a random instance. On success `*out_instance` owns a new handle.
 *
 * # Safety
 * `link` must be a NUL-terminated string and `out_instance` a valid pointer.
 */
enum TlStatus tl_instance_generate(size_t n,
                                   size_t m,
                                   size_t signal_sparsity,
                                   size_t corruption_sparsity,
                                   double amplitude,
                                   const char *link,
                                   uint64_t seed,
                                   struct TlInstance **out_instance);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_instance` a valid pointer.
 */
enum TlStatus tl_instance_load(const char *path, struct TlInstance **out_instance);

/**
 * # Safety
 * `instance` must come from this library and `path` be NUL-terminated.
 */
enum TlStatus tl_instance_save(const struct TlInstance *instance, const char *path);

/**
 * Releases an instance. Null is ignored.
 *
 * # Safety
 * `instance` must come from this library and not be used afterwards.
 */
void tl_instance_free(struct TlInstance *instance);

/**
 * # Safety
 * All pointers must be valid.
 */
enum TlStatus tl_instance_dims(const struct TlInstance *instance, size_t *out_n, size_t *out_m);

/**
 * Copies `x⋆` (length n) and `v⋆` (length m).
 *
 * # Safety
 * Buffers must hold at least the given number of doubles.
 */
enum TlStatus tl_instance_copy_truth(const struct TlInstance *instance,
                                     double *x_out,
                                     size_t x_len,
                                     double *v_out,
                                     size_t v_len);

/**
 * Copies the observations `y` (length m).
 *
 * # Safety
 * `y_out` must hold at least `y_len` doubles.
 */
enum TlStatus tl_instance_copy_observations(const struct TlInstance *instance,
                                            double *y_out,
                                            size_t y_len);

/**
 * Solves the instance over `set_x × set_v`.
 *
 * Sets use the text grammar (`l1:2.5`, `l2:1`, `topk:4`, `full`, `point:0`)
 * plus `l1:anchor[*c]` and `l2:anchor[*c]`, whose radius is taken from
 * the truth `(μx⋆, v⋆)`. `max_iters` 0 and `tol` ≤ 0 select defaults.
 *
 * # Safety
 * Strings must be NUL-terminated and `out_result` a valid pointer.
 */
enum TlStatus tl_solve(const struct TlInstance *instance,
                       const char *set_x,
                       const char *set_v,
                       size_t max_iters,
                       double tol,
                       struct TlSolveResult **out_result);

/**
 * Releases a solve result. Null is ignored.
 *
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void tl_result_free(struct TlSolveResult *result);

/**
 * # Safety
 * Both pointers must be valid.
 */
enum TlStatus tl_result_summary(const struct TlSolveResult *result,
                                struct TlSolveSummary *out_summary);

/**
 * Copies `x̂` (length n) and `v̂` (length m).
 *
 * # Safety
 * Buffers must hold at least the given number of doubles.
 */
enum TlStatus tl_result_copy_estimate(const struct TlSolveResult *result,
                                      double *x_out,
                                      size_t x_len,
                                      double *v_out,
                                      size_t v_len);

/**
 * `√(‖x̂ − μx⋆‖² + ‖v̂ − v⋆‖²)` with μ of the instance's link.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TlStatus tl_joint_error(const struct TlSolveResult *result,
                             const struct TlInstance *instance,
                             double *out_error);

/**
 * Monte Carlo Gaussian width of a set, or the local width `ω_t` when
 * `t > 0`. `dims` gives one dimension per leaf of the set expression.
 *
 * # Safety
 * `set` must be NUL-terminated and `dims` hold `dims_len` values.
 */
enum TlStatus tl_gaussian_width(const char *set,
                                const size_t *dims,
                                size_t dims_len,
                                double t,
                                size_t trials,
                                uint64_t seed,
                                struct TlEstimate *out_estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLASSO_H */
