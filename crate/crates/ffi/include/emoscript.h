#ifndef EMOSCRIPT_H
#define EMOSCRIPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define EMO_OK 0

#define EMO_NULL_POINTER 1

#define EMO_INVALID_UTF8 2

#define EMO_KANJI 3

#define EMO_UNKNOWN_SYMBOL 4

#define EMO_INVALID_ARGUMENT 5

#define EMO_PANIC 99

/**
 * Opaque phoneme corpus accumulating n-gram counts up to a fixed order.
 */
typedef struct EmoCorpus EmoCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next
 * call into the library from the same thread.
 */
const char *emo_last_error(void);

uint32_t emo_phoneme_inventory_size(void);

/**
 * New empty corpus counting n-grams of order 1..=max_order. NULL if max_order is 0.
 */
struct EmoCorpus *emo_corpus_new(uint32_t max_order);

/**
 * # Safety
 * `corpus` must come from `emo_corpus_new` and not be used afterwards. NULL is ignored.
 */
void emo_corpus_free(struct EmoCorpus *corpus);

/**
 * Adds one kana script. Kanji are rejected with `EMO_KANJI`; the corpus is unchanged
 * on failure.
 *
 * # Safety
 * `corpus` must be a live handle and `kana` a NUL-terminated string.
 */
int32_t emo_corpus_add_kana(struct EmoCorpus *corpus, const char *kana);

/**
 * Adds one script given as space-separated phoneme symbols (e.g. "ky o u").
 *
 * # Safety
 * `corpus` must be a live handle and `symbols` a NUL-terminated string.
 */
int32_t emo_corpus_add_phonemes(struct EmoCorpus *corpus, const char *symbols);

/**
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
int32_t emo_corpus_len(const struct EmoCorpus *corpus, size_t *out);

/**
 * Extended entropy. `weights` may be NULL for uniform weights over every order;
 * otherwise it holds `n_weights` values summing to 1, with `n_weights` no larger
 * than the corpus order.
 *
 * # Safety
 * `corpus` must be a live handle, `weights` NULL or readable for `n_weights` values,
 * `out` writable.
 */
int32_t emo_corpus_entropy(const struct EmoCorpus *corpus,
                           const double *weights,
                           size_t n_weights,
                           double *out);

/**
 * Number of distinct m-grams (N_m).
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
int32_t emo_corpus_arrangements(const struct EmoCorpus *corpus, uint32_t m, uint64_t *out);

/**
 * Space-separated phonemes of the inventory that never occur. Free with `emo_string_free`.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
int32_t emo_corpus_gaps(const struct EmoCorpus *corpus, char **out);

/**
 * Kana to space-separated phoneme symbols. Free the result with `emo_string_free`.
 *
 * # Safety
 * `kana` must be a NUL-terminated string; `out` must be writable.
 */
int32_t emo_phonemize(const char *kana, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. NULL is ignored.
 */
void emo_string_free(char *s);

/**
 * WRIME intensity aggregate: (writer + mean(readers)) / 2, all intensities in 0..=3.
 *
 * # Safety
 * `readers` must be readable for `n_readers` bytes; `out` writable.
 */
int32_t emo_wrime_aggregate(uint8_t writer, const uint8_t *readers, size_t n_readers, double *out);

/**
 * Min-max normalization of `n` values into `out` (may alias `values`); a constant
 * input maps to 0.5.
 *
 * # Safety
 * `values` must be readable and `out` writable for `n` doubles.
 */
int32_t emo_normalize(const double *values, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOSCRIPT_H */
