#ifndef MOMGMM_H
#define MOMGMM_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MomgmmStatus {
  MOMGMM_STATUS_OK = 0,
  MOMGMM_STATUS_NULL_POINTER = 1,
  MOMGMM_STATUS_INVALID_ARGUMENT = 2,
  MOMGMM_STATUS_SHAPE_MISMATCH = 3,
  MOMGMM_STATUS_NUMERICAL_ERROR = 4,
  MOMGMM_STATUS_UNSUPPORTED = 5,
  MOMGMM_STATUS_INTERNAL_PANIC = 6,
} MomgmmStatus;

/**
 * Opaque mixture model handle.
 */
typedef struct MomgmmModel MomgmmModel;

/**
 * Opaque sample matrix handle.
 */
typedef struct MomgmmSamples MomgmmSamples;

/**
 * Options for [`momgmm_fit_moments`].
 */
typedef struct MomgmmFitOptions {
  /**
   * Moment order, 1..=18.
   */
  uintptr_t d;
  uintptr_t restarts;
  uintptr_t max_iters;
  double grad_tol;
  /**
   * Augmentation constant, > 0.
   */
  double omega;
  /**
   * 0 = implicit augmentation, 1 = relaxed coordinates with rescaling.
   */
  int32_t post_processing;
  uint64_t seed;
} MomgmmFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *momgmm_status_message(enum MomgmmStatus status);

/**
 * Builds a diagonal-covariance mixture from `m` weights, column-major
 * `n x m` means and column-major `n x m` stddevs.
 *
 * # Safety
 * Buffers must hold the stated number of elements; `out` must be valid.
 */
enum MomgmmStatus momgmm_model_new_diagonal(uintptr_t n,
                                            uintptr_t m,
                                            const double *weights,
                                            const double *means,
                                            const double *stddevs,
                                            struct MomgmmModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must have come from this library and not already be freed.
 */
void momgmm_model_free(struct MomgmmModel *model);

/**
 * Writes the model's dimension and component count.
 *
 * # Safety
 * `model`, `n` and `m` must be valid pointers.
 */
enum MomgmmStatus momgmm_model_dims(const struct MomgmmModel *model, uintptr_t *n, uintptr_t *m);

/**
 * Copies the `m` mixture weights into `out`.
 *
 * # Safety
 * `out` must hold `m` doubles.
 */
enum MomgmmStatus momgmm_model_weights(const struct MomgmmModel *model, double *out);

/**
 * Copies the column-major `n x m` mean matrix into `out`.
 *
 * # Safety
 * `out` must hold `n * m` doubles.
 */
enum MomgmmStatus momgmm_model_means(const struct MomgmmModel *model, double *out);

/**
 * Copies the column-major `n x m` stddev matrix into `out`. Fails with
 * `UNSUPPORTED` when the model carries full covariances.
 *
 * # Safety
 * `out` must hold `n * m` doubles.
 */
enum MomgmmStatus momgmm_model_stddevs(const struct MomgmmModel *model, double *out);

/**
 * Wraps a column-major `n x p` observation buffer.
 *
 * # Safety
 * `data` must hold `n * p` doubles; `out` must be valid.
 */
enum MomgmmStatus momgmm_samples_new(uintptr_t n,
                                     uintptr_t p,
                                     const double *data,
                                     struct MomgmmSamples **out);

/**
 * Releases a sample handle. Null is ignored.
 *
 * # Safety
 * `samples` must have come from this library and not already be freed.
 */
void momgmm_samples_free(struct MomgmmSamples *samples);

/**
 * Writes the sample dimensions.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MomgmmStatus momgmm_samples_dims(const struct MomgmmSamples *samples,
                                      uintptr_t *n,
                                      uintptr_t *p);

/**
 * Copies the column-major `n x p` observations into `out`.
 *
 * # Safety
 * `out` must hold `n * p` doubles.
 */
enum MomgmmStatus momgmm_samples_data(const struct MomgmmSamples *samples, double *out);

/**
 * Draws `p` observations from the model with the given seed.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum MomgmmStatus momgmm_sample(const struct MomgmmModel *model,
                                uintptr_t p,
                                uint64_t seed,
                                struct MomgmmSamples **out);

/**
 * Generates the structured benchmark problem (unit-norm means with pairwise
 * inner products 0.5, diagonal covariances with variances uniform on
 * [0, 2 sigma2]) and draws `p` observations from it.
 *
 * # Safety
 * `truth` and `samples` must be valid pointers.
 */
enum MomgmmStatus momgmm_benchmark(uintptr_t n,
                                   uintptr_t m,
                                   double sigma2,
                                   uintptr_t p,
                                   uint64_t seed,
                                   struct MomgmmModel **truth,
                                   struct MomgmmSamples **samples);

/**
 * Evaluates the order-`d` moment-matching objective of the model against
 * the samples. With `include_constant` nonzero the value is the true
 * squared moment distance.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MomgmmStatus momgmm_objective(const struct MomgmmModel *model,
                                   const struct MomgmmSamples *samples,
                                   uintptr_t d,
                                   int32_t include_constant,
                                   double *value);

/**
 * The defaults used by the command-line fitter.
 */
struct MomgmmFitOptions momgmm_fit_options_default(void);

/**
 * Multi-restart moment-matching fit of an `m`-component diagonal mixture.
 * On success `fitted` owns the recovered model and `best_objective` holds
 * the winning restart's final objective.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MomgmmStatus momgmm_fit_moments(const struct MomgmmSamples *samples,
                                     uintptr_t m,
                                     const struct MomgmmFitOptions *options,
                                     struct MomgmmModel **fitted,
                                     double *best_objective);

/**
 * Multi-restart diagonal EM fit; `loglik` receives the winning restart's
 * final log-likelihood.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MomgmmStatus momgmm_fit_em(const struct MomgmmSamples *samples,
                                uintptr_t m,
                                uintptr_t restarts,
                                uint64_t seed,
                                struct MomgmmModel **fitted,
                                double *loglik);

/**
 * Log-likelihood of the samples under a diagonal model.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MomgmmStatus momgmm_log_likelihood(const struct MomgmmModel *model,
                                        const struct MomgmmSamples *samples,
                                        double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOMGMM_H */
