#ifndef WDMQKD_H
#define WDMQKD_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WqStatus {
  WQ_STATUS_OK = 0,
  WQ_STATUS_NULL_POINTER = 1,
  WQ_STATUS_INVALID_UTF8 = 2,
  WQ_STATUS_INVALID_CONFIG = 3,
  WQ_STATUS_DOMAIN = 4,
  WQ_STATUS_FIT = 5,
  WQ_STATUS_CONTRACT = 6,
  WQ_STATUS_IO = 7,
  WQ_STATUS_FORMAT = 8,
  WQ_STATUS_PANIC = 9,
} WqStatus;

/**
 * Opaque scenario handle.
 */
typedef struct WqScenario WqScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call.
 */
const char *wq_last_error(void);

/**
 * Parses and validates scenario text; `*out` receives a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WqStatus wq_scenario_from_config(const char *text, struct WqScenario **out);

/**
 * Loads a bundled scenario ("201km", "301km", "404km").
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WqStatus wq_scenario_from_preset(const char *name, struct WqScenario **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void wq_scenario_free(struct WqScenario *s);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void wq_string_free(char *p);

/**
 * Number of channel pairs in the scenario's plan.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_channel_count(const struct WqScenario *s, size_t *out);

/**
 * Two-photon loss total, dB.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_loss_total_db(const struct WqScenario *s, double *out);

/**
 * Loss table as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_loss_budget_json(const struct WqScenario *s, char **out);

/**
 * Per-channel dispersion and timing uncertainty as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_timing_json(const struct WqScenario *s, char **out);

/**
 * Device counts chosen by the compensation planner for the bare link,
 * targeting the central channel. `counts` receives `[DCM, DCF]`.
 *
 * # Safety
 * `s` must be a live handle and `counts` point to two writable `usize`.
 */
enum WqStatus wq_plan_compensation(const struct WqScenario *s, size_t *counts);

/**
 * Key report as JSON; `finite` selects the headline mode.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_key_report_json(const struct WqScenario *s, bool finite, char **out);

/**
 * Sweep optimum as JSON (`rate`, `width_ps`, `qber`, `skr`).
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum WqStatus wq_optimize_json(const struct WqScenario *s, char **out);

/**
 * Root-sum-square of `len` jitter FWHMs.
 *
 * # Safety
 * `fwhms` must point to `len` readable doubles and `out` be valid.
 */
enum WqStatus wq_combine_jitter(const double *fwhms, size_t len, double *out);

/**
 * Finite-key length for a sifted block of `m` bits at QBER `delta`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WqStatus wq_finite_key_bits(uint64_t m, double delta, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WDMQKD_H */
