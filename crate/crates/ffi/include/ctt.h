#ifndef CTT_H
#define CTT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CTT_OK 0

/**
 * A required pointer argument was null.
 */
#define CTT_ERR_NULL 1

/**
 * Text input was not valid UTF-8.
 */
#define CTT_ERR_UTF8 2

#define CTT_ERR_IO 3

/**
 * The checkpoint file is malformed or inconsistent.
 */
#define CTT_ERR_CHECKPOINT 4

/**
 * Invalid parameters, such as a zero frame rate.
 */
#define CTT_ERR_CONFIG 5

/**
 * Input the model cannot handle: empty text, too many words, a finished
 * stream.
 */
#define CTT_ERR_INPUT 6

/**
 * A bug: the library panicked. The handle involved should be freed.
 */
#define CTT_ERR_INTERNAL 7

/**
 * Loaded model. Safe to share between threads for tagging.
 */
typedef struct CttModel CttModel;

/**
 * Incremental decoder over one word stream. Keeps its model alive, so the
 * model handle may be freed first.
 */
typedef struct CttStream CttStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *ctt_last_error(void);

/**
 * Loads a checkpoint file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
int32_t ctt_model_load(const char *path, struct CttModel **out);

/**
 * # Safety
 * `model` must come from [`ctt_model_load`] and not be freed twice. Null is
 * ignored.
 */
void ctt_model_free(struct CttModel *model);

/**
 * Tags whitespace-separated `words` in one pass. `*out` receives one
 * `word\tpunct\tdisf\n` line per word.
 *
 * # Safety
 * `model` must be a live handle, `words` a NUL-terminated string and `out`
 * a writable pointer.
 */
int32_t ctt_tag(const struct CttModel *model, const char *words, char **out);

/**
 * Starts a stream that consumes `frame_rate` words per inference and
 * freezes a sentence once `lookahead_words` words follow its end. A
 * `max_buffer` of 0 leaves the buffer uncapped.
 *
 * # Safety
 * `model` must be a live handle and `out` a writable pointer.
 */
int32_t ctt_stream_new(const struct CttModel *model,
                       uint32_t frame_rate,
                       uint32_t lookahead_words,
                       uint32_t max_buffer,
                       struct CttStream **out);

/**
 * Feeds whitespace-separated words. `*out` receives the words finalized by
 * this call as `word\tpunct\tdisf\n` lines, possibly none.
 *
 * # Safety
 * `stream` must be a live handle, `words` a NUL-terminated string and `out`
 * a writable pointer.
 */
int32_t ctt_stream_push(struct CttStream *stream, const char *words, char **out);

/**
 * Flushes the stream; `*out` receives every remaining word. Further pushes
 * fail with `CTT_ERR_INPUT`.
 *
 * # Safety
 * `stream` must be a live handle and `out` a writable pointer.
 */
int32_t ctt_stream_finish(struct CttStream *stream, char **out);

/**
 * # Safety
 * `stream` must come from [`ctt_stream_new`] and not be freed twice. Null
 * is ignored.
 */
void ctt_stream_free(struct CttStream *stream);

/**
 * # Safety
 * `s` must be a string returned by this library, freed once. Null is
 * ignored.
 */
void ctt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTT_H */
