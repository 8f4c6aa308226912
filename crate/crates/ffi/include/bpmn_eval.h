#ifndef BPMN_EVAL_H
#define BPMN_EVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpmnEvalStatus {
  BPMN_EVAL_STATUS_OK = 0,
  BPMN_EVAL_STATUS_NULL_POINTER = 1,
  BPMN_EVAL_STATUS_INVALID_UTF8 = 2,
  BPMN_EVAL_STATUS_PARSE_ERROR = 3,
  BPMN_EVAL_STATUS_CONVERSION_ERROR = 4,
  BPMN_EVAL_STATUS_INVALID_ARGUMENT = 5,
  BPMN_EVAL_STATUS_EMPTY_INPUT = 6,
  BPMN_EVAL_STATUS_PANIC = 7,
} BpmnEvalStatus;

/**
 * Opaque parsed process graph.
 */
typedef struct BpmnGraph BpmnGraph;

typedef struct BpmnGraphStats {
  size_t node_count;
  size_t edge_count;
  size_t gateway_count;
} BpmnGraphStats;

typedef struct BpmnGedResult {
  double cost;
  /**
   * R-GED in [0, 1].
   */
  double r_ged;
  /**
   * False when `cost` is an upper bound because the search budget ran out.
   */
  bool exact;
  size_t expanded_states;
} BpmnGedResult;

typedef struct BpmnTextScores {
  double bleu;
  double rouge_l;
  double meteor;
} BpmnTextScores;

typedef struct BpmnInterval {
  double point;
  double low;
  double high;
  double confidence;
  bool point_outside;
} BpmnInterval;

typedef struct BpmnFriedman {
  double chi2;
  size_t df;
  double p_value;
  double w;
  size_t n_blocks;
  size_t k_treatments;
} BpmnFriedman;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *bpmn_eval_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void bpmn_eval_string_free(char *s);

/**
 * # Safety
 * `raw` must be a NUL-terminated string; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_sanitize(const char *raw, char **out);

/**
 * Extracts the first (or, with `last`, the final) diagram in a completion.
 *
 * # Safety
 * `raw` must be a NUL-terminated string; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_extract(const char *raw, bool last, char **out);

/**
 * Sanitizes and parses DOT into a new graph handle.
 *
 * # Safety
 * `dot` must be a NUL-terminated string; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_graph_parse(const char *dot, struct BpmnGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from [`bpmn_eval_graph_parse`], not yet freed.
 */
void bpmn_eval_graph_free(struct BpmnGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_graph_stats(const struct BpmnGraph *graph,
                                          struct BpmnGraphStats *out);

/**
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_graph_render(const struct BpmnGraph *graph, char **out);

/**
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_graph_to_bpmn_xml(const struct BpmnGraph *graph, char **out);

/**
 * Graph edit distance and R-GED of `generated` against `reference`.
 *
 * # Safety
 * Both graphs must be live handles; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_ged(const struct BpmnGraph *reference,
                                  const struct BpmnGraph *generated,
                                  size_t max_expanded,
                                  uint64_t max_millis,
                                  struct BpmnGedResult *out);

/**
 * BLEU, ROUGE-L and METEOR (0-100) of a candidate text against a reference.
 *
 * # Safety
 * Both strings must be NUL-terminated; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_text_scores(const char *candidate,
                                          const char *reference,
                                          struct BpmnTextScores *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_wilson(uint64_t successes,
                                     uint64_t trials,
                                     double confidence,
                                     struct BpmnInterval *out);

/**
 * Percentile bootstrap interval of the mean of `len` values.
 *
 * # Safety
 * `values` must point to `len` doubles; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_bootstrap(const double *values,
                                        size_t len,
                                        size_t resamples,
                                        double confidence,
                                        uint64_t seed,
                                        struct BpmnInterval *out);

/**
 * Upper tail of the chi-square distribution; 1.0 for `x <= 0` or `df == 0`.
 */
double bpmn_eval_chi_square_sf(double x, size_t df);

/**
 * Friedman test on a row-major `n_blocks x k_treatments` score matrix.
 *
 * # Safety
 * `scores` must point to `n_blocks * k_treatments` doubles; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_friedman(const double *scores,
                                       size_t n_blocks,
                                       size_t k_treatments,
                                       struct BpmnFriedman *out);

/**
 * Guideline verdicts for one diagram as a JSON object. A null `graph`
 * stands for a diagram that failed to parse and yields all-Missing.
 *
 * # Safety
 * `graph` must be null or a live handle; `diagram_id` a NUL-terminated
 * string; `out` a valid pointer.
 */
enum BpmnEvalStatus bpmn_eval_guidelines_json(const struct BpmnGraph *graph,
                                              const char *diagram_id,
                                              size_t size_threshold,
                                              char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BPMN_EVAL_H */
