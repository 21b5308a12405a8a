#ifndef TDRGUARD_H
#define TDRGUARD_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdrStatus {
  TDR_STATUS_OK = 0,
  TDR_STATUS_NULL_POINTER = 1,
  TDR_STATUS_INVALID_ARGUMENT = 2,
  TDR_STATUS_PARSE = 3,
  TDR_STATUS_SIMULATION = 4,
  TDR_STATUS_DETECTION = 5,
  TDR_STATUS_PANIC = 6,
} TdrStatus;

typedef enum TdrThresholdKind {
  TDR_THRESHOLD_KIND_FIXED = 0,
  TDR_THRESHOLD_KIND_BASELINE_MAX_PLUS = 1,
} TdrThresholdKind;

typedef struct TdrModel TdrModel;

typedef struct TdrSeries TdrSeries;

typedef struct TdrTopology TdrTopology;

/**
 * Detector settings; start from `tdr_detector_options_default`.
 */
typedef struct TdrDetectorOptions {
  size_t n_reference;
  size_t n_average;
  /**
   * A `TdrThresholdKind` value.
   */
  uint32_t threshold_kind;
  /**
   * Fixed threshold or margin above the largest baseline score.
   */
  double threshold_value;
  /**
   * Propagation velocity for localisation, m/s.
   */
  double velocity;
} TdrDetectorOptions;

/**
 * Outcome of `tdr_detect` for the newest batch of captures.
 */
typedef struct TdrDetection {
  size_t timestamp;
  double k_score;
  double threshold;
  double mse;
  double xcorr;
  double rqcc;
  bool alien_present;
  bool contaminated;
  /**
   * When false, `distance_m` and `onset_s` are NaN.
   */
  bool has_distance;
  double distance_m;
  double onset_s;
  size_t window_origin;
} TdrDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tdr_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tdr_last_error_message(void);

/**
 * Parses a topology description.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TdrStatus tdr_topology_parse(const char *text, struct TdrTopology **out);

/**
 * # Safety
 * `topology` must come from this library or be NULL.
 */
void tdr_topology_free(struct TdrTopology *topology);

/**
 * DC resistance of all loads in parallel, ohms.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_topology_total_resistance(const struct TdrTopology *topology, double *out);

/**
 * New topology with a transceiver attached at `position` through a stub
 * of `stub_length` metres.
 *
 * # Safety
 * Pointers must be valid; `label` NUL-terminated.
 */
enum TdrStatus tdr_topology_attach_transceiver(const struct TdrTopology *topology,
                                               double position,
                                               double stub_length,
                                               const char *label,
                                               struct TdrTopology **out);

/**
 * New topology with the labelled device unplugged; its stub stays open.
 *
 * # Safety
 * Pointers must be valid; `label` NUL-terminated.
 */
enum TdrStatus tdr_topology_detach(const struct TdrTopology *topology,
                                   const char *label,
                                   struct TdrTopology **out);

/**
 * Record length `tdr_simulate` uses for `topology` when given a
 * non-positive duration, seconds from the capture start.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_default_duration(const struct TdrTopology *topology, double *out);

/**
 * Simulates `n_captures` captures with the default 3 ns pulse and 1 cm
 * grid. Capture `i` carries noise seeded from `(seed, first_index + i)`, so
 * a stream can be produced in pieces. Captures of a modified bus only share
 * the grid of the original when both use the same `duration`; a
 * non-positive value picks the topology default.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_simulate(const struct TdrTopology *topology,
                            double duration,
                            double noise_sigma,
                            uint64_t seed,
                            size_t first_index,
                            size_t n_captures,
                            struct TdrSeries **out);

/**
 * Wraps `n_captures * n_samples` values, capture-major, as a series.
 * `t0` is the injection instant after the first sample, `dt` the step.
 *
 * # Safety
 * `samples` must point to `n_captures * n_samples` doubles.
 */
enum TdrStatus tdr_series_from_samples(const double *samples,
                                       size_t n_captures,
                                       size_t n_samples,
                                       double t0,
                                       double dt,
                                       struct TdrSeries **out);

/**
 * Captures of `first` followed by those of `second`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_series_concat(const struct TdrSeries *first,
                                 const struct TdrSeries *second,
                                 struct TdrSeries **out);

/**
 * Number of captures, 0 for NULL.
 *
 * # Safety
 * `series` must come from this library or be NULL.
 */
size_t tdr_series_len(const struct TdrSeries *series);

/**
 * Borrows the samples of one capture. The data lives as long as `series`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_series_capture(const struct TdrSeries *series,
                                  size_t index,
                                  const double **samples,
                                  size_t *len);

/**
 * # Safety
 * `series` must come from this library or be NULL.
 */
void tdr_series_free(struct TdrSeries *series);

/**
 * 300 reference captures, batches of 30, threshold 0.01 above the largest
 * baseline score, velocity 2e8 m/s.
 */
struct TdrDetectorOptions tdr_detector_options_default(void);

/**
 * Builds a reference model. `options` may be NULL for the defaults.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_calibrate(const struct TdrSeries *series,
                             const struct TdrDetectorOptions *options,
                             struct TdrModel **out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_model_threshold(const struct TdrModel *model, double *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_model_noise_sigma(const struct TdrModel *model, double *out);

/**
 * # Safety
 * `model` must come from this library or be NULL.
 */
void tdr_model_free(struct TdrModel *model);

/**
 * Scores the newest `n_average` captures of `series` against `model`.
 * `options` may be NULL for the defaults. The model is not modified.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TdrStatus tdr_detect(const struct TdrModel *model,
                          const struct TdrSeries *series,
                          const struct TdrDetectorOptions *options,
                          struct TdrDetection *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDRGUARD_H */
