#ifndef CVQUEUE_H
#define CVQUEUE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvqStatus {
  CVQ_STATUS_OK = 0,
  CVQ_STATUS_NULL_POINTER = 1,
  CVQ_STATUS_INVALID_ARGUMENT = 2,
  CVQ_STATUS_NO_CONNECTED_VEHICLES = 3,
  CVQ_STATUS_DIVERGENT = 4,
  CVQ_STATUS_INVALID_OBSERVATION = 5,
  CVQ_STATUS_PANIC = 6,
} CvqStatus;

typedef enum CvqNotLast {
  CVQ_NOT_LAST_PAPER_CLOSED_FORM = 0,
  CVQ_NOT_LAST_EXACT_INTEGRAL = 1,
  CVQ_NOT_LAST_THINNED_INTEGRAL = 2,
} CvqNotLast;

typedef enum CvqVd {
  CVQ_VD_COMPOSITIONAL = 0,
  CVQ_VD_EQ4_CLOSED = 1,
  CVQ_VD_EQ7_CLOSED = 2,
  CVQ_VD_EXACT = 3,
} CvqVd;

typedef enum CvqOverflow {
  CVQ_OVERFLOW_NONE = 0,
  CVQ_OVERFLOW_AKCELIK_STEADY = 1,
  CVQ_OVERFLOW_VITI15 = 2,
  CVQ_OVERFLOW_MEDHI4TH = 3,
  CVQ_OVERFLOW_HEURISTIC_EXP = 4,
  CVQ_OVERFLOW_AKCELIK_CYCLE = 5,
  CVQ_OVERFLOW_VITI_CYCLE = 6,
} CvqOverflow;

typedef enum CvqVdApprox {
  CVQ_VD_APPROX_EQ14 = 0,
  CVQ_VD_APPROX_EQ16_SENSOR = 1,
} CvqVdApprox;

typedef enum CvqEstimator {
  CVQ_ESTIMATOR_KNOWN_NO_Q = 0,
  CVQ_ESTIMATOR_KNOWN_WITH_Q = 1,
  CVQ_ESTIMATOR_KNOWN_WITH_Q_NO_SENSOR = 2,
  CVQ_ESTIMATOR_ESTIMATOR1 = 3,
  CVQ_ESTIMATOR_ESTIMATOR2 = 4,
} CvqEstimator;

typedef enum CvqScenario {
  CVQ_SCENARIO_NO_CV = 0,
  CVQ_SCENARIO_LAST_IS_LAST_NEW_ARRIVALS = 1,
  CVQ_SCENARIO_LAST_NOT_LAST_NEW_ARRIVALS = 2,
  CVQ_SCENARIO_LAST_IS_LAST_OVERFLOW = 3,
  CVQ_SCENARIO_LAST_NOT_LAST_OVERFLOW = 4,
} CvqScenario;

/**
 * Opaque signal and demand configuration.
 */
typedef struct CvqConfig CvqConfig;

/**
 * Opaque per-approach estimator state.
 */
typedef struct CvqStream CvqStream;

/**
 * One cycle's connected-vehicle observation. Times that do not apply are
 * NaN: `t`/`t_prime` for red arrivals, `tau`/`tau_prime` for overflow-era
 * vehicles on the previous cycle's clock.
 */
typedef struct CvqObservation {
  uint32_t m;
  uint32_t l;
  double t;
  bool last_is_last;
  uint32_t l_prime;
  double t_prime;
  double tau;
  double tau_prime;
  bool last_in_overflow;
  bool sensor;
} CvqObservation;

typedef struct CvqEstimate {
  double estimate;
  enum CvqScenario scenario;
  double delta;
  double cond_variance;
} CvqEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *cvq_last_error(void);

/**
 * Validates parameters and creates a configuration handle.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum CvqStatus cvq_config_new(double lambda,
                              double p,
                              double red,
                              double green,
                              double discharge_headway,
                              struct CvqConfig **out);

/**
 * # Safety
 * `cfg` must come from [`cvq_config_new`] and not be used afterwards. Null is ignored.
 */
void cvq_config_free(struct CvqConfig *cfg);

/**
 * Volume-to-capacity ratio `lambda C / X`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_config_rho(const struct CvqConfig *cfg, double *out);

/**
 * Mean last-CV join time, with or without range sensors.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_expected_t(const struct CvqConfig *cfg, bool sensor, double *out);

/**
 * Mean last-CV position, with or without range sensors.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_expected_l(const struct CvqConfig *cfg, bool sensor, double *out);

/**
 * Probability that the last CV is not the last queued vehicle.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_prob_not_last(const struct CvqConfig *cfg, enum CvqNotLast method, double *out);

/**
 * Error variance without overflow.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_variance_d(const struct CvqConfig *cfg,
                              bool sensor,
                              enum CvqVd method,
                              double *out);

/**
 * Steady-state mean overflow queue. `CVQ_OVERFLOW_NONE` writes 0.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_expected_q(const struct CvqConfig *cfg, enum CvqOverflow model, double *out);

/**
 * Approximate error variance with an overflow queue.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_approx_variance_d(const struct CvqConfig *cfg,
                                     enum CvqOverflow model,
                                     enum CvqVdApprox variant,
                                     double *out);

/**
 * Creates an estimator stream. The configuration is copied.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CvqStatus cvq_stream_new(const struct CvqConfig *cfg,
                              enum CvqEstimator estimator,
                              bool sensor,
                              enum CvqOverflow model,
                              struct CvqStream **out);

/**
 * # Safety
 * `stream` must come from [`cvq_stream_new`] and not be used afterwards. Null is ignored.
 */
void cvq_stream_free(struct CvqStream *stream);

/**
 * Estimates the queue of cycle `cycle` (1-based) from one observation.
 *
 * # Safety
 * `stream` must be a live handle, `obs` readable and `out` writable.
 */
enum CvqStatus cvq_stream_estimate(struct CvqStream *stream,
                                   const struct CvqObservation *obs,
                                   uint32_t cycle,
                                   struct CvqEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVQUEUE_H */
