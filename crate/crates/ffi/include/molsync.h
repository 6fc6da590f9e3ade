#ifndef MOLSYNC_H
#define MOLSYNC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MOLSYNC_OK 0

// A required pointer argument was null.
#define MOLSYNC_ERR_NULL 1

// A string argument was not valid UTF-8.
#define MOLSYNC_ERR_UTF8 2

#define MOLSYNC_ERR_INVALID_ARGUMENT 3

#define MOLSYNC_ERR_CONFIG 4

#define MOLSYNC_ERR_SERIES_TOO_SHORT 5

#define MOLSYNC_ERR_UNDEFINED_EYE 6

#define MOLSYNC_ERR_IO 7

// The library panicked; the message holds the panic payload.
#define MOLSYNC_ERR_PANIC 8

// Opaque experiment configuration.
typedef struct MolsyncConfig MolsyncConfig;

// Opaque prepared run: one channel realisation with its sync estimate.
typedef struct MolsyncTrial MolsyncTrial;

// Averages over every run of a configuration.
typedef struct MolsyncPointResult {
  double ser_proposed;
  double ser_baseline;
  double e_bar;
  double erasure_rate;
  size_t runs;
  size_t total_symbols;
  // Decision threshold in molecules.
  double threshold;
} MolsyncPointResult;

// Metrics of one run for both receivers.
typedef struct MolsyncRunMetrics {
  double ser_proposed;
  double ser_baseline;
  // Normalized sync error of the proposed receiver.
  double e_bar;
  double erasure_rate;
  size_t n_symbols;
  // Non-zero when injected errors had to be re-sorted.
  int32_t sync_reordered;
} MolsyncRunMetrics;

// Eye opening under both alignments, in normalized counts and seconds.
typedef struct MolsyncEyeMetrics {
  double height_proposed;
  double width_proposed;
  double height_fixed;
  double width_fixed;
} MolsyncEyeMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *molsync_version(void);

// Message of the last failure on this thread, or an empty string.
//
// The pointer stays valid until the next failing call on this thread.
const char *molsync_last_error(void);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void molsync_string_free(char *s);

// Hitting rate f(t) in 1/s for receiver radius `r`, distance `d` (µm) and
// diffusion coefficient `diffusion` (µm²/s).
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
int32_t molsync_hitting_rate(double r, double d, double diffusion, double t, double *out);

// Fraction F(t) of released molecules absorbed by time `t`.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
int32_t molsync_hitting_fraction(double r, double d, double diffusion, double t, double *out);

// Time of the maximum hitting rate, d²/(6D).
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
int32_t molsync_peak_time(double r, double d, double diffusion, double *out);

// Default configuration (the reference channel, 20 runs of 10⁴ symbols).
//
// # Safety
// `out` must be null or point to writable memory for one pointer.
int32_t molsync_config_default(struct MolsyncConfig **out);

// Parses a TOML configuration; unknown keys are rejected.
//
// # Safety
// `toml` must be null or a NUL-terminated string; `out` must be null or
// point to writable memory for one pointer.
int32_t molsync_config_from_toml(const char *toml, struct MolsyncConfig **out);

// Reads a TOML configuration file.
//
// # Safety
// As [`molsync_config_from_toml`], with `path` in place of `toml`.
int32_t molsync_config_load(const char *path, struct MolsyncConfig **out);

// Sets one key from a TOML value literal, e.g. `("snr_db", "8.0")` or
// `("threshold", "\"calibrated\"")`. The configuration is unchanged if the
// result does not validate.
//
// # Safety
// `cfg` must be null or a live handle; `key` and `value` must be null or
// NUL-terminated strings.
int32_t molsync_config_set(struct MolsyncConfig *cfg, const char *key, const char *value);

// Serializes the configuration to TOML; free the result with
// [`molsync_string_free`].
//
// # Safety
// `cfg` must be null or a live handle; `out` must be null or point to
// writable memory for one pointer.
int32_t molsync_config_to_toml(const struct MolsyncConfig *cfg, char **out);

// Hex fingerprint of the configuration, as written to result files; free
// with [`molsync_string_free`].
//
// # Safety
// As [`molsync_config_to_toml`].
int32_t molsync_config_fingerprint(const struct MolsyncConfig *cfg, char **out);

// # Safety
// `cfg` must be null or a handle from this library that is not yet freed.
void molsync_config_free(struct MolsyncConfig *cfg);

// Runs every configured run and averages the metrics.
//
// # Safety
// `cfg` must be null or a live handle; `out` must be null or writable.
int32_t molsync_run_point(const struct MolsyncConfig *cfg, struct MolsyncPointResult *out);

// Transmits, propagates and estimates sync peaks for run `run_index`.
//
// # Safety
// `cfg` must be null or a live handle; `out` must be null or point to
// writable memory for one pointer.
int32_t molsync_trial_prepare(const struct MolsyncConfig *cfg,
                              size_t run_index,
                              struct MolsyncTrial **out);

// Scores both receivers, injecting `e_bar_target` into the proposed
// receiver's peaks.
//
// # Safety
// `trial` must be null or a live handle; `out` must be null or writable.
int32_t molsync_trial_evaluate(const struct MolsyncTrial *trial,
                               double e_bar_target,
                               struct MolsyncRunMetrics *out);

// Eye height and width over `span_fraction·T_s`, sampled at
// `sample_fraction` of the span.
//
// # Safety
// `trial` must be null or a live handle; `out` must be null or writable.
int32_t molsync_trial_eye(const struct MolsyncTrial *trial,
                          double span_fraction,
                          double sample_fraction,
                          struct MolsyncEyeMetrics *out);

// # Safety
// `trial` must be null or a handle from this library that is not yet
// freed.
void molsync_trial_free(struct MolsyncTrial *trial);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOLSYNC_H */
