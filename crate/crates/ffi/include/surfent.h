#ifndef SURFENT_H
#define SURFENT_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible entry point.
typedef enum SurfentStatus {
  SURFENT_STATUS_OK = 0,
  SURFENT_STATUS_NULL_POINTER = 1,
  SURFENT_STATUS_INVALID_ARGUMENT = 2,
  // Escapes, empty sample sets, exhausted budgets.
  SURFENT_STATUS_NUMERICAL = 3,
  // The requested quantity is not known for this system.
  SURFENT_STATUS_UNAVAILABLE = 4,
  SURFENT_STATUS_PANIC = 5,
} SurfentStatus;

// Opaque handle to a surface system.
typedef struct SurfentSystem SurfentSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread (empty if none). The
// pointer stays valid until the next failing call on the same thread.
const char *surfent_last_error(void);

// Creates a built-in system by name, e.g. `"cat"` or `"standard"` with
// `params` `"k=6"`. `params` may be null.
//
// # Safety
// `name` and `params` must be null or valid NUL-terminated strings; `out`
// must be writable.
enum SurfentStatus surfent_system_new(const char *name,
                                      const char *params,
                                      struct SurfentSystem **out);

// Releases a handle; null is ignored.
//
// # Safety
// `system` must come from [`surfent_system_new`] and not be used again.
void surfent_system_free(struct SurfentSystem *system);

// Topological entropy when it is known in closed form.
//
// # Safety
// `system` must be a live handle and `out` writable.
enum SurfentStatus surfent_known_entropy(const struct SurfentSystem *system, double *out);

// Largest singular value of the row-major 2×2 matrix `m`.
//
// # Safety
// `m` must point to four readable doubles and `out` be writable.
enum SurfentStatus surfent_operator_norm(const double *m, double *out);

// `Df^n` at `(u, v)`, written row-major into `out[0..4]`.
//
// # Safety
// `system` must be a live handle and `out` must hold four doubles.
enum SurfentStatus surfent_cocycle_jacobian(const struct SurfentSystem *system,
                                            double u,
                                            double v,
                                            size_t n,
                                            double *out);

// Extrapolated growth rate of `∫‖Df^n‖`, sampled on a stratified
// `grid × grid` plan, over horizons `n_min..=n_max`.
//
// # Safety
// `system` must be a live handle and `out` writable.
enum SurfentStatus surfent_integral_norm_rate(const struct SurfentSystem *system,
                                              size_t grid,
                                              uint64_t seed,
                                              size_t n_min,
                                              size_t n_max,
                                              double *out);

// Extrapolated length growth rate of a curve (`"hloop:0"`,
// `"segment:0,0,1,1"`, …). Planar systems clip the image to their box.
//
// # Safety
// `system` must be a live handle, `curve` a valid string, `out` writable.
enum SurfentStatus surfent_curve_growth_rate(const struct SurfentSystem *system,
                                             const char *curve,
                                             size_t n_min,
                                             size_t n_max,
                                             double tol,
                                             double *out);

// Extrapolated `max_x (1/n) log ‖Df^n_x‖` over a `grid × grid` grid.
//
// # Safety
// `system` must be a live handle and `out` writable.
enum SurfentStatus surfent_lambda_plus_rate(const struct SurfentSystem *system,
                                            size_t grid,
                                            size_t n_max,
                                            double *out);

// Growth slope of greedy `(n, eps)`-separated sets over a shuffled
// stratified cloud of `grid²` points, horizons `1..=n_max`.
//
// # Safety
// `system` must be a live handle and `out` writable.
enum SurfentStatus surfent_katok_slope(const struct SurfentSystem *system,
                                       size_t grid,
                                       uint64_t seed,
                                       double eps,
                                       size_t n_max,
                                       double *out);

// Exact limiting rate of the oscillating-curve example for `a > 1`.
//
// # Safety
// `out` must be writable.
enum SurfentStatus surfent_theoretical_rate(double a, double *out);

// Fitted rate of the clipped oscillating-curve length over
// `n_min, n_min + step, …, ≤ n_max`.
//
// # Safety
// `out` must be writable.
enum SurfentStatus surfent_restricted_growth_rate(double a,
                                                  size_t n_min,
                                                  size_t n_max,
                                                  size_t step,
                                                  double tol,
                                                  double *out);

// Library version as a static NUL-terminated string.
const char *surfent_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFENT_H */
