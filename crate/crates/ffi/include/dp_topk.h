#ifndef DP_TOPK_H
#define DP_TOPK_H

/* Generated by cbindgen from dp-topk-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Mechanism selector for `dp_topk_calibrate`.
 */
typedef enum DpTopkMechanism {
  DP_TOPK_MECHANISM_ADAPTIVE_STABLE_TOP_K = 0,
  DP_TOPK_MECHANISM_FIXED_STABLE_TOP_K = 1,
  DP_TOPK_MECHANISM_EM_PEEL = 2,
  DP_TOPK_MECHANISM_PTR_GAUSSIAN = 3,
  DP_TOPK_MECHANISM_PTR_LAPLACE = 4,
} DpTopkMechanism;

/**
 * Result codes for every FFI entry point.
 */
typedef enum DpTopkStatus {
  DP_TOPK_STATUS_OK = 0,
  /**
   * The stability test refused; no indices were produced.
   */
  DP_TOPK_STATUS_BOTTOM = 1,
  DP_TOPK_STATUS_NULL_POINTER = 2,
  DP_TOPK_STATUS_INVALID_ARGUMENT = 3,
  DP_TOPK_STATUS_BUFFER_TOO_SMALL = 4,
  DP_TOPK_STATUS_BUDGET_EXHAUSTED = 5,
  DP_TOPK_STATUS_CALIBRATION_FAILED = 6,
  DP_TOPK_STATUS_INTERNAL = 7,
} DpTopkStatus;

/**
 * Opaque histogram handle owned by the caller.
 */
typedef struct DpTopkHistogram DpTopkHistogram;

/**
 * Calibrated noise parameters; unused fields are NaN.
 */
typedef struct DpTopkCalibration {
  double rho;
  double sigma;
  double eps_em;
  double eps_pure;
  double achieved_eps;
  double achieved_delta;
} DpTopkCalibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a histogram from `m` dense counts. On success `*out` owns the
 * handle; release it with `dp_topk_histogram_free`.
 *
 * # Safety
 * `counts` must point to `m` readable `uint64_t`s and `out` must be a valid
 * destination pointer.
 */
enum DpTopkStatus dp_topk_histogram_new(const uint64_t *counts,
                                        uintptr_t m,
                                        struct DpTopkHistogram **out);

/**
 * Frees a histogram handle. A null handle is a no-op.
 *
 * # Safety
 * `h` must be a pointer previously returned by `dp_topk_histogram_new`.
 */
void dp_topk_histogram_free(struct DpTopkHistogram *h);

/**
 * Stable top-k with a data-chosen k (zero regularizer).
 *
 * Writes the released indices (at most `capacity`) and the chosen rank.
 * Returns `Bottom` when the stability test refuses.
 *
 * # Safety
 * `h`, `out_indices`, `out_len`, and `out_chosen_k` must be valid; the index
 * buffer must hold at least `capacity` entries.
 */
enum DpTopkStatus dp_topk_stable_adaptive(const struct DpTopkHistogram *h,
                                          double rho,
                                          double delta_t,
                                          uint64_t seed,
                                          uintptr_t *out_indices,
                                          uintptr_t capacity,
                                          uintptr_t *out_len,
                                          uintptr_t *out_chosen_k);

/**
 * Stable top-k returning exactly `k` indices.
 *
 * # Safety
 * As for `dp_topk_stable_adaptive`; the buffer needs room for `k` entries.
 */
enum DpTopkStatus dp_topk_stable_fixed(const struct DpTopkHistogram *h,
                                       uintptr_t k,
                                       double lambda,
                                       double rho,
                                       double delta_t,
                                       uint64_t seed,
                                       uintptr_t *out_indices,
                                       uintptr_t capacity,
                                       uintptr_t *out_len);

/**
 * One-shot Gumbel top-k with per-round parameter `eps_round`.
 *
 * # Safety
 * As for `dp_topk_stable_adaptive`.
 */
enum DpTopkStatus dp_topk_em_top_k(const struct DpTopkHistogram *h,
                                   uintptr_t k,
                                   double eps_round,
                                   uint64_t seed,
                                   uintptr_t *out_indices,
                                   uintptr_t capacity,
                                   uintptr_t *out_len);

/**
 * Gaussian stability test at rank `k`.
 *
 * # Safety
 * As for `dp_topk_stable_adaptive`.
 */
enum DpTopkStatus dp_topk_ptr_gaussian(const struct DpTopkHistogram *h,
                                       uintptr_t k,
                                       double sigma,
                                       double delta_t,
                                       uint64_t seed,
                                       uintptr_t *out_indices,
                                       uintptr_t capacity,
                                       uintptr_t *out_len);

/**
 * Laplace stability test at rank `k`.
 *
 * # Safety
 * As for `dp_topk_stable_adaptive`.
 */
enum DpTopkStatus dp_topk_ptr_laplace(const struct DpTopkHistogram *h,
                                      uintptr_t k,
                                      double eps,
                                      double delta_t,
                                      uint64_t seed,
                                      uintptr_t *out_indices,
                                      uintptr_t capacity,
                                      uintptr_t *out_len);

/**
 * Calibrates mechanism noise against a target budget over `queries`
 * composed invocations. `rounds` only matters for `EmPeel`.
 *
 * # Safety
 * `out` must be a valid destination pointer.
 */
enum DpTopkStatus dp_topk_calibrate(enum DpTopkMechanism mechanism,
                                    double eps,
                                    double delta,
                                    double delta_t,
                                    uint32_t queries,
                                    uint32_t rounds,
                                    struct DpTopkCalibration *out);

/**
 * Local sensitivity of the top-k release.
 *
 * # Safety
 * `h` and `out` must be valid pointers.
 */
enum DpTopkStatus dp_topk_local_sensitivity(const struct DpTopkHistogram *h,
                                            uintptr_t k,
                                            uint64_t *out);

/**
 * Smooth-sensitivity upper envelope with shortcut horizon `d0`.
 *
 * # Safety
 * `h` and `out` must be valid pointers.
 */
enum DpTopkStatus dp_topk_smooth_sensitivity(const struct DpTopkHistogram *h,
                                             uintptr_t k,
                                             double beta,
                                             uintptr_t d0,
                                             double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DP_TOPK_H */
