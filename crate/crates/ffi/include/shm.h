#ifndef SHM_H
#define SHM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShmStatus {
  SHM_STATUS_OK = 0,
  SHM_STATUS_NULL_POINTER = 1,
  SHM_STATUS_INVALID_ARGUMENT = 2,
  SHM_STATUS_OUT_OF_DOMAIN = 3,
  SHM_STATUS_IO = 4,
  SHM_STATUS_PARSE = 5,
  SHM_STATUS_NUMERICAL = 6,
  SHM_STATUS_NOT_FOUND = 7,
  SHM_STATUS_PANIC = 99,
} ShmStatus;

// Posterior draws read from a chains CSV file.
typedef struct ShmChains ShmChains;

// Posterior-predictive frequency draws for one structure.
typedef struct ShmPredictive ShmPredictive;

// Frequency-stiffness surrogate.
typedef struct ShmSurrogate ShmSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *shm_version(void);

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into the library from the same thread.
const char *shm_last_error(void);

// First bending frequency (Hz) of a built-in template on uniform Winkler
// springs of the given stiffness per unit length (N/m^2).
//
// # Safety
// `template_name` must be a NUL-terminated string; `out_hz` must be writable.
enum ShmStatus shm_fe_first_frequency(const char *template_name,
                                      double stiffness,
                                      double scour_depth,
                                      double *out_hz);

// Fit a surrogate for a built-in template over `[lo, hi]`.
//
// # Safety
// `template_name` must be a NUL-terminated string; `out` must be writable.
enum ShmStatus shm_surrogate_fit(const char *template_name,
                                 double lo,
                                 double hi,
                                 size_t n_points,
                                 size_t degree,
                                 struct ShmSurrogate **out);

// Load a surrogate from JSON, either bare or wrapped in a `surrogate` field
// as written by the CLI.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ShmStatus shm_surrogate_load(const char *path, struct ShmSurrogate **out);

// # Safety
// `h` must be a surrogate handle; `out_hz` must be writable.
enum ShmStatus shm_surrogate_eval(const struct ShmSurrogate *h, double stiffness, double *out_hz);

// # Safety
// `h` must be a surrogate handle; `lo` and `hi` must be writable.
enum ShmStatus shm_surrogate_domain(const struct ShmSurrogate *h, double *lo, double *hi);

// # Safety
// `h` must be null or a handle from this library not yet freed.
void shm_surrogate_free(struct ShmSurrogate *h);

// Read a chains CSV file written by `shm sample`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ShmStatus shm_chains_load(const char *path, struct ShmChains **out);

// Number of chains and post-warmup draws per chain.
//
// # Safety
// `h` must be a chains handle; the outputs must be writable.
enum ShmStatus shm_chains_shape(const struct ShmChains *h, size_t *n_chains, size_t *n_draws);

// Copy the pooled draws of parameter `name` into `buf`. `len` receives the
// number of draws; when `buf` is null or `cap` is too small nothing is copied
// and `InvalidArgument` is returned with `len` set.
//
// # Safety
// `h` must be a chains handle, `name` a NUL-terminated string, `buf` null or
// valid for `cap` writes, `len` writable.
enum ShmStatus shm_chains_param(const struct ShmChains *h,
                                const char *name,
                                double *buf,
                                size_t cap,
                                size_t *len);

// # Safety
// `h` must be null or a handle from this library not yet freed.
void shm_chains_free(struct ShmChains *h);

// Posterior-predictive distribution of the first frequency of one structure.
//
// # Safety
// `chains` and `surrogate` must be handles, `structure_id` a NUL-terminated
// string, `out` writable.
enum ShmStatus shm_predictive_new(const struct ShmChains *chains,
                                  const struct ShmSurrogate *surrogate,
                                  const char *structure_id,
                                  uint64_t seed,
                                  struct ShmPredictive **out);

// Mean and variance of the predictive draws.
//
// # Safety
// `h` must be a predictive handle; the outputs must be writable.
enum ShmStatus shm_predictive_moments(const struct ShmPredictive *h,
                                      double *mean,
                                      double *variance);

// Fraction of predictive draws at or below `frequency_hz`.
//
// # Safety
// `h` must be a predictive handle; `out_p` must be writable.
enum ShmStatus shm_predictive_tail_probability(const struct ShmPredictive *h,
                                               double frequency_hz,
                                               double *out_p);

// # Safety
// `h` must be null or a handle from this library not yet freed.
void shm_predictive_free(struct ShmPredictive *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHM_H */
