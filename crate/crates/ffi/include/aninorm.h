#ifndef ANINORM_H
#define ANINORM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AninormStatus {
  ANINORM_STATUS_OK = 0,
  ANINORM_STATUS_NULL_POINTER = 1,
  ANINORM_STATUS_INVALID_ARGUMENT = 2,
  ANINORM_STATUS_UNSTABLE = 3,
  ANINORM_STATUS_NO_STABILIZING_SOLUTION = 4,
  ANINORM_STATUS_MAX_ITERATIONS = 5,
  ANINORM_STATUS_NUMERICAL = 6,
  ANINORM_STATUS_IO = 7,
  ANINORM_STATUS_PANIC = 8,
} AninormStatus;

typedef enum AninormNormKind {
  ANINORM_NORM_KIND_CONVERGED = 0,
  ANINORM_NORM_KIND_BOUNDARY_A0 = 1,
  ANINORM_NORM_KIND_BOUNDARY_HINF = 2,
} AninormNormKind;

/**
 * Opaque model handle.
 */
typedef struct AninormModel AninormModel;

typedef struct AninormResult {
  double gamma;
  double gamma_hat;
  /**
   * NaN when the optimum is approached only as eta grows without bound.
   */
  double eta_star;
  double q_star;
  uint64_t evaluations;
  enum AninormNormKind kind;
  double h2_norm;
  double hinf_norm;
} AninormResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model from row-major `A` (n x n), `B` (n x m), `C` (p x n) and
 * `D` (p x m). With `n = 0`, `a`, `b` and `c` may be null.
 *
 * # Safety
 * Each non-empty array must hold the stated number of doubles; `out` must be
 * writable.
 */
enum AninormStatus aninorm_model_new(size_t n,
                                     size_t m,
                                     size_t p,
                                     const double *a,
                                     const double *b,
                                     const double *c,
                                     const double *d,
                                     struct AninormModel **out);

/**
 * Seeded random stable model.
 *
 * # Safety
 * `out` must be writable.
 */
enum AninormStatus aninorm_model_random_stable(size_t n,
                                               size_t m,
                                               size_t p,
                                               uint64_t seed,
                                               double rho_cap,
                                               struct AninormModel **out);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum AninormStatus aninorm_model_load_json(const char *path, struct AninormModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` must be NUL-terminated.
 */
enum AninormStatus aninorm_model_save_json(const struct AninormModel *model, const char *path);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void aninorm_model_free(struct AninormModel *model);

/**
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum AninormStatus aninorm_model_dims(const struct AninormModel *model,
                                      size_t *n,
                                      size_t *m,
                                      size_t *p);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_model_is_stable(const struct AninormModel *model, bool *out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_h2_norm(const struct AninormModel *model, double *out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_hinf_norm(const struct AninormModel *model, double tol, double *out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_anisotropic_norm(const struct AninormModel *model,
                                            double a,
                                            double tol,
                                            struct AninormResult *out);

/**
 * Mean anisotropy of a square stable model; `+inf` when its spectral
 * density is singular somewhere on the unit circle.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_mean_anisotropy(const struct AninormModel *model,
                                           size_t grid,
                                           double *out);

/**
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum AninormStatus aninorm_feasible(const struct AninormModel *model,
                                    double a,
                                    double gamma,
                                    double tol,
                                    bool *feasible,
                                    double *norm);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AninormStatus aninorm_grid_oracle_norm(const struct AninormModel *model,
                                            double a,
                                            size_t grid,
                                            double *out);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *aninorm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aninorm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANINORM_H */
