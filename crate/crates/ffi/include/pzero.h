#ifndef PZERO_H
#define PZERO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PzeroStatus {
  PZERO_STATUS_OK = 0,
  PZERO_STATUS_NULL_ARGUMENT = 1,
  PZERO_STATUS_INVALID_ARGUMENT = 2,
  PZERO_STATUS_IO = 3,
  PZERO_STATUS_PARSE = 4,
  PZERO_STATUS_CHECKPOINT = 5,
  PZERO_STATUS_WRONG_MODEL_KIND = 6,
  PZERO_STATUS_EMPTY = 7,
  PZERO_STATUS_BUFFER_TOO_SMALL = 8,
  PZERO_STATUS_PANIC = 99,
} PzeroStatus;

/**
 * A loaded checkpoint.
 */
typedef struct PzeroModel PzeroModel;

/**
 * A loaded vocabulary.
 */
typedef struct PzeroVocab PzeroVocab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. The pointer stays valid until the next call.
 */
const char *pzero_last_error(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PzeroStatus pzero_vocab_load(const char *path, struct PzeroVocab **out);

/**
 * # Safety
 * `vocab` must be null or a handle from [`pzero_vocab_load`] not yet freed.
 */
void pzero_vocab_free(struct PzeroVocab *vocab);

/**
 * # Safety
 * `vocab` must be a live handle and `out` a valid pointer.
 */
enum PzeroStatus pzero_vocab_len(const struct PzeroVocab *vocab, size_t *out);

/**
 * Id of `surface` after normalization; unknown words map to `[UNK]`.
 *
 * # Safety
 * `vocab` must be a live handle, `surface` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum PzeroStatus pzero_vocab_id(const struct PzeroVocab *vocab, const char *surface, uint32_t *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PzeroStatus pzero_model_load(const char *path, struct PzeroModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`pzero_model_load`] not yet freed.
 */
void pzero_model_free(struct PzeroModel *model);

/**
 * Model kind code: 0 base, 1 pzero, 2 cloze, 3 as, 4 as-pzero.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PzeroStatus pzero_model_kind(const struct PzeroModel *model, uint32_t *out);

/**
 * Selection scores of every position for the `[MASK]` at 1-based
 * `mask_index`. Positions that can never be selected get `-INFINITY`.
 *
 * # Safety
 * `model` must be a live handle, `tokens` must hold `len` ids and `out`
 * must have room for `out_len` floats.
 */
enum PzeroStatus pzero_selection_scores(const struct PzeroModel *model,
                                        const uint32_t *tokens,
                                        size_t len,
                                        size_t mask_index,
                                        float *out,
                                        size_t out_len);

/**
 * Decodes every slot of the ZAR instances in `instances_jsonl` (one JSON
 * instance per line) with an `as` or `as-pzero` model and writes the
 * predictions as NUL-terminated JSONL into `buf`. `needed` always receives
 * the required size including the NUL; with a short buffer the call
 * returns `BUFFER_TOO_SMALL` and writes nothing.
 *
 * # Safety
 * `model` must be a live handle, `instances_jsonl` a NUL-terminated
 * string, `buf` null or valid for `buf_len` bytes and `needed` a valid
 * pointer.
 */
enum PzeroStatus pzero_predict(const struct PzeroModel *model,
                               const char *instances_jsonl,
                               char *buf,
                               size_t buf_len,
                               size_t *needed);

/**
 * Generates PZero instances from the parsed corpus at `corpus_path` with
 * windows of `window_sentences` sentences and at most `max_len` tokens,
 * writing them as JSONL to `out_path`. Fails with `EMPTY` when no instance
 * can be generated.
 *
 * # Safety
 * `corpus_path` and `out_path` must be NUL-terminated strings, `vocab` a
 * live handle and `count` null or a valid pointer.
 */
enum PzeroStatus pzero_generate(const char *corpus_path,
                                const struct PzeroVocab *vocab,
                                size_t window_sentences,
                                size_t max_len,
                                const char *out_path,
                                size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PZERO_H */
