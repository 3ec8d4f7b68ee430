#ifndef GENDERPROBE_H
#define GENDERPROBE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Mirrors the CLI exit codes, plus argument diagnostics.
 */
typedef enum {
  GP_OK = 0,
  GP_USAGE = 1,
  GP_DATA = 2,
  GP_NUMERIC = 3,
  GP_NULL_ARGUMENT = 4,
  GP_PANIC = 5,
} GpStatus;

/**
 * Opaque parsed-corpus handle.
 */
typedef struct GpCorpus GpCorpus;

/**
 * Opaque classifier snapshot handle.
 */
typedef struct GpModel GpModel;

/**
 * Opaque orthogonal gender-transform handle.
 */
typedef struct GpTransform GpTransform;

/**
 * Opaque embedding-table handle.
 */
typedef struct GpVectors GpVectors;

/**
 * Skip-gram training options. Obtain defaults from
 * [`gp_sgns_options_default`] and adjust fields as needed.
 */
typedef struct {
  uint32_t dim;
  uint32_t window;
  uint32_t negatives;
  uint32_t epochs;
  double initial_step;
  double subsample_threshold;
  uint64_t min_count;
  uint64_t seed;
  /**
   * 1 = deterministic single worker.
   */
  uint32_t workers;
} GpSgnsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Never null;
 * empty before any failure. Valid until the next failing call.
 */
const char *gp_last_error(void);

/**
 * Library version as a static string.
 */
const char *gp_version(void);

GpSgnsOptions gp_sgns_options_default(void);

/**
 * Parse a tagged-corpus file into a new handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
GpStatus gp_corpus_parse_file(const char *path, GpCorpus **out);

/**
 * # Safety
 * `corpus` must come from [`gp_corpus_parse_file`] and not be freed twice.
 */
void gp_corpus_free(GpCorpus *corpus);

/**
 * # Safety
 * `corpus` must be a live handle or null.
 */
uintptr_t gp_corpus_sentence_count(const GpCorpus *corpus);

/**
 * # Safety
 * `corpus` must be a live handle or null.
 */
uintptr_t gp_corpus_token_count(const GpCorpus *corpus);

/**
 * Rewrite a corpus under a condition (`forms`, `lemmata`, `nouns`,
 * `not_nouns`) and write the token stream to a file.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_corpus_condition_to_file(const GpCorpus *corpus,
                                     const char *kind,
                                     const char *out_path);

/**
 * Train skip-gram embeddings from a token-stream file (space-separated
 * tokens, one sentence per line).
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_embeddings_train_file(const char *stream_path,
                                  const GpSgnsOptions *options,
                                  GpVectors **out);

/**
 * Load a vector file written by `gp_vectors_save` or the CLI.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_vectors_load(const char *path, GpVectors **out);

/**
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_vectors_save(const GpVectors *vectors, const char *path);

/**
 * # Safety
 * `vectors` must come from this library and not be freed twice.
 */
void gp_vectors_free(GpVectors *vectors);

/**
 * # Safety
 * `vectors` must be a live handle or null.
 */
uintptr_t gp_vectors_len(const GpVectors *vectors);

/**
 * # Safety
 * `vectors` must be a live handle or null.
 */
uintptr_t gp_vectors_dim(const GpVectors *vectors);

/**
 * Copy one token's embedding into `buffer` (length `buffer_len`, which
 * must equal the dimension).
 *
 * # Safety
 * `buffer` must point to at least `buffer_len` writable doubles.
 */
GpStatus gp_vectors_lookup(const GpVectors *vectors,
                           const char *token,
                           double *buffer,
                           uintptr_t buffer_len);

/**
 * Train the orthogonal gender transform from a labeled-lemma file
 * (`lemma<TAB>gender` lines; genders `masc`/`fem`).
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_densifier_train(const GpVectors *vectors,
                            const char *labeled_path,
                            uint64_t iterations,
                            double learning_rate,
                            uint64_t seed,
                            GpTransform **out);

/**
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_transform_load(const char *path, GpTransform **out);

/**
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_transform_save(const GpTransform *transform, const char *path);

/**
 * # Safety
 * `transform` must come from this library and not be freed twice.
 */
void gp_transform_free(GpTransform *transform);

/**
 * # Safety
 * `transform` must be a live handle or null.
 */
uintptr_t gp_transform_dim(const GpTransform *transform);

/**
 * The gender coordinate of one token under a trained transform.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_gender_score(const GpTransform *transform,
                         const GpVectors *vectors,
                         const char *token,
                         double *out);

/**
 * Load a classifier snapshot written by the CLI.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_model_load(const char *path, GpModel **out);

/**
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void gp_model_free(GpModel *model);

/**
 * Probability that `token` is feminine under a classifier snapshot.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
GpStatus gp_model_predict_feminine(const GpModel *model,
                                   const GpVectors *vectors,
                                   const char *token,
                                   double *out);

/**
 * Spearman's ρ between scores and binary labels (0 masculine,
 * 1 feminine), tied ranks averaged.
 *
 * # Safety
 * `scores` and `labels` must point to `n` readable elements; `out` must
 * be writable.
 */
GpStatus gp_spearman_rho(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENDERPROBE_H */
