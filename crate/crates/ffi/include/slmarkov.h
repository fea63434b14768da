/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SLMARKOV_H
#define SLMARKOV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SlmStatus {
  SLM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SLM_STATUS_NULL_POINTER = 1,
  /**
   * Parameters or configuration rejected.
   */
  SLM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data rejected (bad opinion, observation out of range, ...).
   */
  SLM_STATUS_DATA = 3,
  SLM_STATUS_IO = 4,
  /**
   * An output buffer is shorter than required.
   */
  SLM_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Requested value does not exist yet (for example before the first window).
   */
  SLM_STATUS_UNAVAILABLE = 6,
  SLM_STATUS_PANIC = 7,
} SlmStatus;

/**
 * Opaque online identifier.
 */
typedef struct SlmIdentifier SlmIdentifier;

/**
 * Opaque simulated observation trace.
 */
typedef struct SlmTrace SlmTrace;

/**
 * Borrowed view of an opinion over `k` outcomes.
 */
typedef struct SlmOpinion {
  size_t k;
  /**
   * `k` belief masses.
   */
  const double *belief;
  double uncertainty;
  /**
   * `k` base rates.
   */
  const double *base_rate;
} SlmOpinion;

/**
 * Identifier parameters; discounts apply to every row and base rates are
 * uniform.
 */
typedef struct SlmIdentifierParams {
  size_t num_states;
  size_t window_len;
  double prior_weight;
  double discount_prev;
  double discount_new;
  /**
   * Degree-of-conflict threshold; `INFINITY` disables resets.
   */
  double conflict_threshold;
} SlmIdentifierParams;

/**
 * Delay classification parameters.
 */
typedef struct SlmThresholdConfig {
  double margin_ms;
  double harq_offset_ms;
  size_t average_window;
  size_t warmup_inliers;
} SlmThresholdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *slm_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *slm_version(void);

/**
 * Projected probability `b + a·u` into `out_projection[0..k]`.
 *
 * # Safety
 * `opinion` must point to a valid view; `out_projection` to `k` doubles.
 */
enum SlmStatus slm_opinion_project(const struct SlmOpinion *opinion, double *out_projection);

/**
 * Opinion equivalent to `k` evidence counts under prior weight
 * `prior_weight`. `base_rate` may be null for a uniform base rate.
 *
 * # Safety
 * `evidence` must hold `k` doubles, `base_rate` `k` doubles or be null,
 * `out_belief` room for `k` doubles.
 */
enum SlmStatus slm_opinion_from_evidence(size_t k,
                                         const double *evidence,
                                         double prior_weight,
                                         const double *base_rate,
                                         double *out_belief,
                                         double *out_uncertainty);

/**
 * Cumulative fusion of two non-vacuous, non-dogmatic opinions.
 *
 * # Safety
 * Input views must be valid; output buffers hold `k` doubles
 * (`out_base_rate` may be null).
 */
enum SlmStatus slm_opinion_fuse(const struct SlmOpinion *a,
                                const struct SlmOpinion *b,
                                double *out_belief,
                                double *out_uncertainty,
                                double *out_base_rate);

/**
 * Trust discount by `discount` in [0, 1].
 *
 * # Safety
 * As for [`slm_opinion_fuse`].
 */
enum SlmStatus slm_opinion_discount(const struct SlmOpinion *opinion,
                                    double discount,
                                    double *out_belief,
                                    double *out_uncertainty);

/**
 * Degree of conflict between two opinions, in [0, 1].
 *
 * # Safety
 * Input views must be valid; `out` must point to one double.
 */
enum SlmStatus slm_opinion_degree_of_conflict(const struct SlmOpinion *a,
                                              const struct SlmOpinion *b,
                                              double *out);

/**
 * Fills `out` with the defaults for `num_states` states.
 *
 * # Safety
 * `out` must point to writable params.
 */
enum SlmStatus slm_identifier_default_params(size_t num_states, struct SlmIdentifierParams *out);

/**
 * Creates an identifier; release it with [`slm_identifier_free`].
 *
 * # Safety
 * `params` must be valid and `out` writable.
 */
enum SlmStatus slm_identifier_new(const struct SlmIdentifierParams *params,
                                  struct SlmIdentifier **out);

/**
 * Releases an identifier. Null is ignored.
 *
 * # Safety
 * `ident` must come from [`slm_identifier_new`] and not be used afterwards.
 */
void slm_identifier_free(struct SlmIdentifier *ident);

/**
 * Feeds one observed state (1-based id). `out_window_done` (nullable) is
 * set to 1 when this observation completed a window, else 0.
 *
 * # Safety
 * `ident` must be a live handle.
 */
enum SlmStatus slm_identifier_push(struct SlmIdentifier *ident,
                                   uint32_t state_id,
                                   uint8_t *out_window_done);

/**
 * Applies one window given as `num_states²` row-major transition counts.
 *
 * # Safety
 * `counts` must hold `len` values.
 */
enum SlmStatus slm_identifier_step_counts(struct SlmIdentifier *ident,
                                          const uint64_t *counts,
                                          size_t len);

/**
 * Number of windows processed so far.
 *
 * # Safety
 * `ident` must be live, `out` writable.
 */
enum SlmStatus slm_identifier_windows(const struct SlmIdentifier *ident, size_t *out);

/**
 * Latest projected transition matrix, `num_states²` doubles row-major.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum SlmStatus slm_identifier_transition(const struct SlmIdentifier *ident,
                                         double *out,
                                         size_t len);

/**
 * Latest per-row uncertainty, `num_states` doubles.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum SlmStatus slm_identifier_uncertainty(const struct SlmIdentifier *ident,
                                          double *out,
                                          size_t len);

/**
 * Latest per-row degree of conflict. Returns `SLM_STATUS_UNAVAILABLE`
 * after the first window, which has nothing to compare against.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum SlmStatus slm_identifier_conflicts(const struct SlmIdentifier *ident, double *out, size_t len);

/**
 * Latest reset flags, one byte per row (1 = row was reset).
 *
 * # Safety
 * `out` must hold `len` bytes.
 */
enum SlmStatus slm_identifier_resets(const struct SlmIdentifier *ident, uint8_t *out, size_t len);

/**
 * Simulates the built-in two-state scenario with `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlmStatus slm_trace_reference(uint64_t seed, struct SlmTrace **out);

/**
 * Simulates a scenario given as nul-terminated JSON, using its own seed.
 *
 * # Safety
 * `json` must be a valid C string, `out` writable.
 */
enum SlmStatus slm_trace_from_spec_json(const char *json, struct SlmTrace **out);

/**
 * Number of observations in a trace.
 *
 * # Safety
 * `trace` must be live, `out` writable.
 */
enum SlmStatus slm_trace_len(const struct SlmTrace *trace, size_t *out);

/**
 * Copies the 1-based state ids into `out`.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum SlmStatus slm_trace_states(const struct SlmTrace *trace, uint32_t *out, size_t len);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `trace` must come from a trace constructor and not be used afterwards.
 */
void slm_trace_free(struct SlmTrace *trace);

/**
 * Fills `out` with the default delay thresholds.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlmStatus slm_threshold_default(struct SlmThresholdConfig *out);

/**
 * Classifies `len` consecutive packet delays (ms) into states 1..=3.
 * `cfg` may be null for defaults.
 *
 * # Safety
 * `delays_ms` and `out_states` must hold `len` values.
 */
enum SlmStatus slm_delay_classify(const double *delays_ms,
                                  size_t len,
                                  const struct SlmThresholdConfig *cfg,
                                  uint32_t *out_states);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLMARKOV_H */
