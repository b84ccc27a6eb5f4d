#ifndef TANGSEG_H
#define TANGSEG_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_INVALID_UTF8 = 2,
  TS_STATUS_CONFIG = 3,
  TS_STATUS_MISSING_PATH = 4,
  TS_STATUS_IO = 5,
  TS_STATUS_FORMAT = 6,
  TS_STATUS_INFERENCE = 7,
  TS_STATUS_EVALUATION = 8,
  TS_STATUS_BUFFER_TOO_SMALL = 9,
  TS_STATUS_INVALID_LABEL = 10,
  TS_STATUS_PANIC = 11,
} TsStatus;

/**
 * Loaded character embeddings.
 */
typedef struct TsEmbeddings TsEmbeddings;

/**
 * Embeddings plus a trained classifier.
 */
typedef struct TsSegmenter TsSegmenter;

typedef struct TsReport {
  double precision;
  double recall;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
} TsReport;

typedef struct TsStats {
  uint64_t noc;
  uint64_t nop;
  /**
   * nop / noc, or NaN when there are no content characters.
   */
  double ratio;
} TsStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *tangseg_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *tangseg_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void tangseg_string_free(char *s);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus tangseg_embeddings_load(const char *path, struct TsEmbeddings **out);

/**
 * # Safety
 * `handle` must be null or come from `tangseg_embeddings_load`, freed once.
 */
void tangseg_embeddings_free(struct TsEmbeddings *handle);

/**
 * Vector dimension, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live embeddings handle.
 */
size_t tangseg_embeddings_dim(const struct TsEmbeddings *handle);

/**
 * Vocabulary size, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live embeddings handle.
 */
size_t tangseg_embeddings_vocab_size(const struct TsEmbeddings *handle);

/**
 * Builds a segmenter from embeddings (copied, so the embeddings handle
 * stays independent) and a checkpoint file. Default label settings apply.
 *
 * # Safety
 * `embeddings` must be a live handle, `checkpoint_path` a NUL-terminated
 * string, `out` writable.
 */
enum TsStatus tangseg_segmenter_new(const struct TsEmbeddings *embeddings,
                                    const char *checkpoint_path,
                                    struct TsSegmenter **out);

/**
 * # Safety
 * `handle` must be null or come from `tangseg_segmenter_new`, freed once.
 */
void tangseg_segmenter_free(struct TsSegmenter *handle);

/**
 * Punctuates `text` with 。 at predicted boundaries. The result must be
 * released with `tangseg_string_free`.
 *
 * # Safety
 * `handle` must be live, `text` NUL-terminated, `out` writable.
 */
enum TsStatus tangseg_segment(const struct TsSegmenter *handle, const char *text, char **out);

/**
 * Writes one label per character of `text` (0 non-boundary, 1 boundary).
 * The text is classified as-is, so pass content characters only. `len`
 * receives the character count; when `capacity` is too small nothing is
 * written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `handle` must be live, `text` NUL-terminated, `labels` valid for
 * `capacity` bytes, `len` writable.
 */
enum TsStatus tangseg_predict(const struct TsSegmenter *handle,
                              const char *text,
                              uint8_t *labels,
                              size_t capacity,
                              size_t *len);

/**
 * Boundary precision, recall and F1 over two label arrays of equal length.
 *
 * # Safety
 * `gold` and `predicted` must be valid for `len` bytes (or `len` is 0);
 * `out` writable.
 */
enum TsStatus tangseg_score(const uint8_t *gold,
                            const uint8_t *predicted,
                            size_t len,
                            struct TsReport *out);

/**
 * Character and punctuation counts of punctuated text under the default
 * label settings.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` writable.
 */
enum TsStatus tangseg_stats(const char *text, struct TsStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TANGSEG_H */
