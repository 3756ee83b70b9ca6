#ifndef MULTIFRAC_H
#define MULTIFRAC_H

/* Generated by cbindgen; regenerate with `cargo build -p multifrac-ffi --features header`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of the C interface.
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_UTF8 = 2,
  MF_STATUS_CONFIG = 3,
  MF_STATUS_INVALID_ARGUMENT = 4,
  MF_STATUS_NUMERICAL = 5,
  MF_STATUS_BUFFER_TOO_SMALL = 6,
  MF_STATUS_PANIC = 7,
} MfStatus;

// Simulator built from a run configuration.
typedef struct MfSimulator MfSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` with a trailing
// NUL, truncating to `len`. Returns the full message length without NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mf_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *mf_version(void);

// Builds a simulator from a JSON run configuration.
//
// # Safety
// `config_json` must be null or a NUL-terminated string; `out` must be null
// or valid for writing one pointer.
enum MfStatus mf_simulator_new(const char *config_json, struct MfSimulator **out);

// Releases a simulator. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from [`mf_simulator_new`] not yet freed.
void mf_simulator_free(struct MfSimulator *sim);

// Number of output nodes of one simulated path, or 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t mf_simulator_n_nodes(const struct MfSimulator *sim);

// Simulates one path on `(seed, stream_id)` and writes its values at the
// output nodes to `values`. When `hurst` is not null the realized Hurst
// exponent at the same nodes is written there. Both buffers need
// [`mf_simulator_n_nodes`] entries, passed as `len`.
//
// # Safety
// `sim` must be a live handle; `values` and a non-null `hurst` must point to
// `len` writable doubles.
enum MfStatus mf_simulator_simulate(const struct MfSimulator *sim,
                                    uint64_t seed,
                                    uint64_t stream_id,
                                    double *values,
                                    double *hurst,
                                    size_t len);

// Covariance of fractional Brownian motion with exponent `h`.
//
// # Safety
// `out` must be null or valid for writing one double.
enum MfStatus mf_fbm_cov(double t, double s, double h, double *out);

// Covariance of the multifractional field at `(t, h_t)` and `(s, h_s)`.
// With `strict` set the removable singularity is an error instead of
// being evaluated as a limit.
//
// # Safety
// `out` must be null or valid for writing one double.
enum MfStatus mf_mbm_cov(double t, double s, double h_t, double h_s, bool strict, double *out);

// Covariance of the process with a random constant exponent drawn from the
// mixture `(h_values, h_weights)` of `n` atoms and constant scale `sigma`.
// `h_weights` may be null for equal weights.
//
// # Safety
// `h_values` and a non-null `h_weights` must point to `n` readable doubles;
// `out` must be null or valid for writing one double.
enum MfStatus mf_stationary_cov(double t,
                                double s,
                                const double *h_values,
                                const double *h_weights,
                                size_t n,
                                double sigma,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIFRAC_H */
