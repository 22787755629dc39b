#ifndef DEPHASIM_H
#define DEPHASIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DephasimStatus {
  DEPHASIM_STATUS_OK = 0,
  DEPHASIM_STATUS_INVALID_PARAMETER = 1,
  DEPHASIM_STATUS_DOMAIN = 2,
  DEPHASIM_STATUS_COVERAGE = 3,
  DEPHASIM_STATUS_OUT_OF_RANGE = 4,
  DEPHASIM_STATUS_QUADRATURE = 5,
  DEPHASIM_STATUS_INFEASIBLE = 6,
  DEPHASIM_STATUS_NON_POSITIVE = 7,
  DEPHASIM_STATUS_GRID_MISMATCH = 8,
  DEPHASIM_STATUS_UNSUPPORTED = 9,
  DEPHASIM_STATUS_IO = 10,
  DEPHASIM_STATUS_PARSE = 11,
  DEPHASIM_STATUS_NULL_POINTER = 12,
  DEPHASIM_STATUS_BUFFER_TOO_SMALL = 13,
  DEPHASIM_STATUS_PANIC = 14,
} DephasimStatus;

// Standard pulse-sequence families.
typedef enum DephasimFamily {
  DEPHASIM_FAMILY_FREE = 0,
  DEPHASIM_FAMILY_PDD = 1,
  DEPHASIM_FAMILY_CPMG = 2,
  DEPHASIM_FAMILY_UDD = 3,
} DephasimFamily;

// Ohmic-family environment plus the scale of its continuum exponent.
typedef struct DephasimEnvironment DephasimEnvironment;

typedef struct DephasimSequence DephasimSequence;

typedef struct DephasimTrace DephasimTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// Valid until the next failing call on the same thread.
const char *dephasim_last_error(void);

// Library version as a static NUL-terminated string.
const char *dephasim_version(void);

// Ohmic environment with cutoff `omega_c` (rad/s) and `k_B·T` in units of
// `ħω` (0 for zero temperature). The continuum exponent starts out
// comb-normalized with `ω_b = 2π·4` rad/s.
//
// # Safety
// `out` must be valid for a pointer write.
enum DephasimStatus dephasim_environment_new(double s,
                                             double lambda,
                                             double omega_c,
                                             double temperature_energy,
                                             struct DephasimEnvironment **out);

// Use the bath integral itself as the continuum exponent.
//
// # Safety
// `env` must be a live handle or null.
enum DephasimStatus dephasim_environment_use_bath_normalization(struct DephasimEnvironment *env);

// Divide the bath integral by `omega_b`, matching a comb of spacing `omega_b`.
//
// # Safety
// `env` must be a live handle or null.
enum DephasimStatus dephasim_environment_use_comb_normalization(struct DephasimEnvironment *env,
                                                                double omega_b);

// # Safety
// `env` must come from [`dephasim_environment_new`] and not be used afterwards.
void dephasim_environment_free(struct DephasimEnvironment *env);

// `n` pulses of a standard family over `total_time` seconds.
//
// # Safety
// `out` must be valid for a pointer write.
enum DephasimStatus dephasim_sequence_family(enum DephasimFamily family,
                                             double total_time,
                                             size_t n,
                                             struct DephasimSequence **out);

// Arbitrary sequence from ascending pulse times in `[0, total_time]`.
//
// # Safety
// `times` must point to `count` doubles (or be null when `count` is 0);
// `out` must be valid for a pointer write.
enum DephasimStatus dephasim_sequence_new(double total_time,
                                          const double *times,
                                          size_t count,
                                          struct DephasimSequence **out);

// Number of pulses, 0 for a null handle.
//
// # Safety
// `seq` must be a live handle or null.
size_t dephasim_sequence_num_pulses(const struct DephasimSequence *seq);

// Copy the pulse times into `out`, which holds `capacity` doubles.
//
// # Safety
// `seq` must be a live handle; `out` must hold `capacity` doubles.
enum DephasimStatus dephasim_sequence_pulse_times(const struct DephasimSequence *seq,
                                                  double *out,
                                                  size_t capacity);

// `|F(ω, t)|²` of the sequence truncated at `t`.
//
// # Safety
// `seq` must be a live handle; `out` must be valid for a write.
enum DephasimStatus dephasim_filter_power(const struct DephasimSequence *seq,
                                          double omega,
                                          double t,
                                          double *out);

// # Safety
// `seq` must come from a sequence constructor and not be used afterwards.
void dephasim_sequence_free(struct DephasimSequence *seq);

// Continuum trace on `grid` (closed form at zero temperature, quadrature
// otherwise).
//
// # Safety
// Handles must be live; `grid` must hold `points` ascending times in
// `[0, T]`; `out` must be valid for a pointer write.
enum DephasimStatus dephasim_trace_continuum(const struct DephasimEnvironment *env,
                                             const struct DephasimSequence *seq,
                                             const double *grid,
                                             size_t points,
                                             struct DephasimTrace **out);

// Closed-form continuum trace; fails with `Unsupported` above zero
// temperature.
//
// # Safety
// As for [`dephasim_trace_continuum`].
enum DephasimStatus dephasim_trace_closed_form(const struct DephasimEnvironment *env,
                                               const struct DephasimSequence *seq,
                                               const double *grid,
                                               size_t points,
                                               struct DephasimTrace **out);

// Exact trace of the comb with `harmonics` lines spaced `omega_b` apart.
//
// # Safety
// As for [`dephasim_trace_continuum`].
enum DephasimStatus dephasim_trace_comb(const struct DephasimEnvironment *env,
                                        double omega_b,
                                        size_t harmonics,
                                        const struct DephasimSequence *seq,
                                        const double *grid,
                                        size_t points,
                                        struct DephasimTrace **out);

// Monte Carlo estimate from `realizations` comb realizations.
//
// # Safety
// As for [`dephasim_trace_continuum`].
enum DephasimStatus dephasim_trace_monte_carlo(const struct DephasimEnvironment *env,
                                               double omega_b,
                                               size_t harmonics,
                                               const struct DephasimSequence *seq,
                                               const double *grid,
                                               size_t points,
                                               size_t realizations,
                                               uint64_t seed,
                                               struct DephasimTrace **out);

// Fourier-domain smoothing with default settings; the grid must be uniform.
//
// # Safety
// `trace` must be a live handle; `out` must be valid for a pointer write.
enum DephasimStatus dephasim_trace_smooth(const struct DephasimTrace *trace,
                                          struct DephasimTrace **out);

// Number of samples, 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t dephasim_trace_len(const struct DephasimTrace *trace);

// Copy `Γ` values into `out`, which holds `capacity` doubles.
//
// # Safety
// `trace` must be a live handle; `out` must hold `capacity` doubles.
enum DephasimStatus dephasim_trace_values(const struct DephasimTrace *trace,
                                          double *out,
                                          size_t capacity);

// BLP measure: sum of positive increments.
//
// # Safety
// `trace` must be a live handle; `out` must be valid for a write.
enum DephasimStatus dephasim_blp(const struct DephasimTrace *trace, double *out);

// Time-averaged coherence over `[0, horizon]`.
//
// # Safety
// `trace` must be a live handle; `out` must be valid for a write.
enum DephasimStatus dephasim_protection(const struct DephasimTrace *trace,
                                        double horizon,
                                        double *out);

// # Safety
// `trace` must come from a trace constructor and not be used afterwards.
void dephasim_trace_free(struct DephasimTrace *trace);

// Genetic search for the `pulses`-pulse sequence maximizing protection at
// `total_time` under the continuum of `env`. `max_generations = 0` keeps
// the default budget.
//
// # Safety
// `env` must be a live handle; `out_seq` and `out_fitness` must be valid
// for writes.
enum DephasimStatus dephasim_optimize_ndd(const struct DephasimEnvironment *env,
                                          double total_time,
                                          size_t pulses,
                                          uint64_t seed,
                                          size_t max_generations,
                                          struct DephasimSequence **out_seq,
                                          double *out_fitness);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPHASIM_H */
