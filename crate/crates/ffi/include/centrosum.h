#ifndef CENTROSUM_H
#define CENTROSUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsMode {
  CS_MODE_BASELINE_GREEDY = 0,
  CS_MODE_BEAM_ONLY = 1,
  CS_MODE_BEAM_GREEDY = 2,
} CsMode;

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  CS_STATUS_INVALID_ARGUMENT = 1,
  CS_STATUS_VALIDATION = 2,
  CS_STATUS_DATA = 3,
  CS_STATUS_NUMERIC = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  CS_STATUS_INTERNAL = 5,
} CsStatus;

/**
 * A loaded corpus split.
 */
typedef struct CsCorpus CsCorpus;

/**
 * A loaded centroid model.
 */
typedef struct CsModel CsModel;

typedef struct CsSelectionOptions {
  size_t budget;
  size_t n;
  size_t beam;
  size_t window;
  enum CsMode mode;
} CsSelectionOptions;

typedef struct CsRougeScore {
  double recall;
  double precision;
  double f1;
} CsRougeScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *cs_last_error_message(void);

/**
 * Default options for a word budget.
 */
struct CsSelectionOptions cs_selection_defaults(size_t budget);

/**
 * Loads cluster metadata (JSON lines) and its embedding store.
 *
 * # Safety
 * `metadata_path` and `embeddings_path` must be null or valid C strings;
 * `out` must be null or writable.
 */
enum CsStatus cs_corpus_load(const char *metadata_path,
                             const char *embeddings_path,
                             struct CsCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a handle from [`cs_corpus_load`] not yet freed.
 */
void cs_corpus_free(struct CsCorpus *corpus);

/**
 * Number of clusters, or 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t cs_corpus_len(const struct CsCorpus *corpus);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be null or a valid C string; `out` must be null or writable.
 */
enum CsStatus cs_model_load(const char *path, struct CsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`cs_model_load`] not yet freed.
 */
void cs_model_free(struct CsModel *model);

/**
 * Summarizes cluster `index` and writes a JSON object with `cluster_id`,
 * `chosen`, `positions`, `text`, `words` and `score` to `out_json`.
 * A null `model` uses the mean-pooled centroid; a null `options` uses the
 * defaults for a 100-word budget.
 *
 * # Safety
 * `corpus` and `model` must be null or live handles, `options` null or
 * readable, `out_json` null or writable.
 */
enum CsStatus cs_summarize(const struct CsCorpus *corpus,
                           size_t index,
                           const struct CsModel *model,
                           const struct CsSelectionOptions *options,
                           char **out_json);

/**
 * ROUGE of `candidate` against `n_refs` references, averaged over
 * references. `order` 1 or 2 selects ROUGE-N; 0 selects ROUGE-L.
 *
 * # Safety
 * `candidate` must be a valid C string, `references` an array of
 * `n_refs` valid C strings, `out` writable.
 */
enum CsStatus cs_rouge(const char *candidate,
                       const char *const *references,
                       size_t n_refs,
                       uint32_t order,
                       struct CsRougeScore *out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENTROSUM_H */
