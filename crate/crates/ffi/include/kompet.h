#ifndef KOMPET_H
#define KOMPET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum KompetStatus {
  KOMPET_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KOMPET_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  KOMPET_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be read.
   */
  KOMPET_STATUS_IO = 3,
  /**
   * Malformed input data, an unknown label or an out-of-range argument.
   */
  KOMPET_STATUS_INVALID_INPUT = 4,
  /**
   * The computation is undefined for the given data (e.g. kappa with no chance disagreement).
   */
  KOMPET_STATUS_UNDEFINED = 5,
  /**
   * Internal failure; the call had no effect.
   */
  KOMPET_STATUS_PANIC = 6,
} KompetStatus;

typedef enum KompetSpanKind {
  KOMPET_SPAN_KIND_SKILL = 0,
  KOMPET_SPAN_KIND_KNOWLEDGE = 1,
} KompetSpanKind;

/**
 * Loaded taxonomy snapshot. Create with [`kompet_taxonomy_load`], release with [`kompet_taxonomy_free`].
 */
typedef struct KompetTaxonomy KompetTaxonomy;

/**
 * Outcome of labeling one span.
 */
typedef struct KompetSpanLabel {
  /**
   * Index of the coarse label (see `kompet_label_tag`).
   */
  uint32_t label;
  /**
   * True when no candidate matched and the label is the K99 fallback.
   */
  bool missing;
  /**
   * Edit distance of the best match; meaningless when `missing`.
   */
  size_t distance;
  /**
   * Candidates retrieved before the rerank.
   */
  size_t candidates;
} KompetSpanLabel;

typedef struct KompetAsoResult {
  double epsilon_hat;
  double sigma_boot;
  double epsilon_min;
  bool dominant;
} KompetAsoResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next kompet call on the same thread.
 */
const char *kompet_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kompet_version(void);

/**
 * Number of coarse labels; valid indices are `0..kompet_label_count()`.
 */
uint32_t kompet_label_count(void);

/**
 * Static tag (e.g. "K06") of a label index, or null when out of range.
 */
const char *kompet_label_tag(uint32_t index);

/**
 * Index of a label tag.
 *
 * # Safety
 * `tag` must be a NUL-terminated string; `out` must be writable.
 */
enum KompetStatus kompet_label_index(const char *tag, uint32_t *out);

/**
 * Character-level edit distance.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings; `out` must be writable.
 */
enum KompetStatus kompet_levenshtein(const char *a, const char *b, size_t *out);

/**
 * Load a JSON-lines taxonomy snapshot indexed for `language`.
 *
 * # Safety
 * `path` and `language` must be NUL-terminated strings; `out` must be writable.
 * The handle written to `out` must be released with `kompet_taxonomy_free`.
 */
enum KompetStatus kompet_taxonomy_load(const char *path,
                                       const char *language,
                                       struct KompetTaxonomy **out);

/**
 * Release a taxonomy handle. Null is ignored.
 *
 * # Safety
 * `taxonomy` must come from `kompet_taxonomy_load` and not be used afterwards.
 */
void kompet_taxonomy_free(struct KompetTaxonomy *taxonomy);

/**
 * Number of concepts in a loaded taxonomy (0 for null).
 *
 * # Safety
 * `taxonomy` must be null or a live handle.
 */
size_t kompet_taxonomy_len(const struct KompetTaxonomy *taxonomy);

/**
 * Distantly label one span surface: retrieve `k` candidates, rerank by edit
 * distance, map the winner to its coarse label; K99 with `missing` when nothing matches.
 *
 * # Safety
 * `taxonomy` must be a live handle, `surface` a NUL-terminated string, `out` writable.
 */
enum KompetStatus kompet_label_span(const struct KompetTaxonomy *taxonomy,
                                    const char *surface,
                                    enum KompetSpanKind kind,
                                    size_t k,
                                    struct KompetSpanLabel *out);

/**
 * Support-weighted macro F1 over label indices.
 *
 * # Safety
 * `gold` and `pred` must point to `n` readable elements each; `out` must be writable.
 */
enum KompetStatus kompet_weighted_macro_f1(const uint32_t *gold,
                                           const uint32_t *pred,
                                           size_t n,
                                           double *out);

/**
 * Cohen's kappa between two raters over arbitrary integer categories.
 *
 * # Safety
 * `a` and `b` must point to `n` readable elements each; `out` must be writable.
 */
enum KompetStatus kompet_cohen_kappa(const uint32_t *a, const uint32_t *b, size_t n, double *out);

/**
 * Almost stochastic order test of `a` over `b`.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` readable values; `out` must be writable.
 */
enum KompetStatus kompet_aso(const double *a,
                             size_t na,
                             const double *b,
                             size_t nb,
                             double alpha,
                             size_t grid_size,
                             size_t bootstrap_iters,
                             uint64_t seed,
                             struct KompetAsoResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KOMPET_H */
