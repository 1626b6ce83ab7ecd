#ifndef LPPLAB_H
#define LPPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LppStatus {
  LPP_STATUS_OK = 0,
  LPP_STATUS_INVALID_PARAMETER = 1,
  LPP_STATUS_OUT_OF_DOMAIN = 2,
  LPP_STATUS_DEGENERATE = 3,
  LPP_STATUS_MEMORY_BUDGET = 4,
  LPP_STATUS_ENUMERATION_GUARD = 5,
  LPP_STATUS_NO_CONVERGENCE = 6,
  LPP_STATUS_QUADRATURE = 7,
  LPP_STATUS_MISSING_PROFILE = 8,
  LPP_STATUS_PARSE = 9,
  LPP_STATUS_SCHEMA = 10,
  LPP_STATUS_BUDGET_REFUSED = 11,
  LPP_STATUS_INCOMPLETE = 12,
  LPP_STATUS_IO = 13,
  LPP_STATUS_NULL_POINTER = 14,
  LPP_STATUS_PANIC = 15,
} LppStatus;

/*
 Opaque tabulated Tracy-Widom GUE distribution.
 */
typedef struct LppTwReference LppTwReference;

/*
 Opaque weight distribution.
 */
typedef struct LppWeightSpec LppWeightSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next lpplab call on the same thread.
 */
const char *lpp_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *lpp_version(void);

/*
 Parse a weight spec such as `"family=exponential, rate=1"`.

 # Safety
 `fragment` must be a NUL-terminated string; `out_spec` must be writable.
 */
enum LppStatus lpp_weight_spec_parse(const char *fragment, struct LppWeightSpec **out_spec);

/*
 The affinely standardized (mean 0, variance 1) copy of `spec`.

 # Safety
 `spec` must come from this library; `out_spec` must be writable.
 */
enum LppStatus lpp_weight_spec_standardize(const struct LppWeightSpec *spec,
                                           struct LppWeightSpec **out_spec);

/*
 # Safety
 `spec` must come from this library and must not be used afterwards. NULL is ignored.
 */
void lpp_weight_spec_free(struct LppWeightSpec *spec);

/*
 # Safety
 `spec` must come from this library; the out-pointers must be writable.
 */
enum LppStatus lpp_weight_spec_moments(const struct LppWeightSpec *spec,
                                       double *out_mean,
                                       double *out_variance);

/*
 Passage time `T(n, k)` over a row-major grid of `k` rows of `n + 1`
 weights, bottom row first.

 # Safety
 `weights` must point to `(n + 1) * k` doubles; `out_value` must be writable.
 */
enum LppStatus lpp_passage_time(size_t n, size_t k, const double *weights, double *out_value);

/*
 Passage time plus the row profile `v_0..v_n` of the lowest optimal path.

 # Safety
 `weights` must point to `(n + 1) * k` doubles, `out_profile` to `n + 1` writable slots.
 */
enum LppStatus lpp_passage_time_with_path(size_t n,
                                          size_t k,
                                          const double *weights,
                                          double *out_value,
                                          size_t *out_profile);

/*
 Passage time with weights drawn from `spec` on the stream of
 `(master_seed, replica)`; no grid is materialized.

 # Safety
 `spec` must come from this library; `out_value` must be writable.
 */
enum LppStatus lpp_passage_time_streamed(size_t n,
                                         size_t k,
                                         const struct LppWeightSpec *spec,
                                         uint64_t master_seed,
                                         uint64_t replica,
                                         double *out_value);

/*
 `(t - n mu - 2 sigma n^((1+a)/2)) / (sigma n^(1/2 - a/6))`.

 # Safety
 `out_value` must be writable.
 */
enum LppStatus lpp_scaling_apply(uint64_t n,
                                 double a,
                                 double mu,
                                 double sigma,
                                 double t,
                                 double *out_value);

/*
 Largest eigenvalue of a `k × k` GUE matrix, normalized so the spectrum
 edge sits at `2 sqrt(k)`.

 # Safety
 `out_value` must be writable.
 */
enum LppStatus lpp_gue_lambda_max(size_t k,
                                  uint64_t master_seed,
                                  uint64_t replica,
                                  double *out_value);

/*
 Build a Tracy-Widom table with the given quadrature order and grid step.

 # Safety
 `out_ref` must be writable.
 */
enum LppStatus lpp_tw_reference_new(size_t order, double step, struct LppTwReference **out_ref);

/*
 # Safety
 `table` must come from this library and must not be used afterwards. NULL is ignored.
 */
void lpp_tw_reference_free(struct LppTwReference *table);

/*
 # Safety
 `table` must come from this library; `out_value` must be writable.
 */
enum LppStatus lpp_tw_cdf(const struct LppTwReference *table, double s, double *out_value);

/*
 # Safety
 `table` must come from this library; `out_value` must be writable.
 */
enum LppStatus lpp_tw_density(const struct LppTwReference *table, double s, double *out_value);

/*
 # Safety
 `table` must come from this library; `out_value` must be writable.
 */
enum LppStatus lpp_tw_quantile(const struct LppTwReference *table, double u, double *out_value);

/*
 # Safety
 `table` must come from this library; the out-pointers must be writable.
 */
enum LppStatus lpp_tw_mean_variance(const struct LppTwReference *table,
                                    double *out_mean,
                                    double *out_variance);

/*
 One-sample Kolmogorov-Smirnov distance between `values` and the table.

 # Safety
 `values` must point to `len` doubles; `table` must come from this library.
 */
enum LppStatus lpp_ks_tw(const struct LppTwReference *table,
                         const double *values,
                         size_t len,
                         double *out_value);

/*
 Run the experiment described by a TOML config file. `output_override`
 may be NULL; `workers` of 0 means the default. `out_complete` is set to 1
 when every replica finished.

 # Safety
 `config_path` must be NUL-terminated; `output_override` NULL or NUL-terminated.
 */
enum LppStatus lpp_run_config(const char *config_path,
                              const char *output_override,
                              size_t workers,
                              int32_t *out_complete);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPPLAB_H */
