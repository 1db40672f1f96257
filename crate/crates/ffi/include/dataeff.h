#ifndef DATAEFF_H
#define DATAEFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DeStatus {
  DE_STATUS_OK = 0,
  DE_STATUS_NULL_POINTER = 1,
  DE_STATUS_INVALID_ARGUMENT = 2,
  // A bracketed frame failed to parse.
  DE_STATUS_PARSE = 3,
  // A corpus could not be read or is malformed.
  DE_STATUS_DATA = 4,
  // Curve fitting failed.
  DE_STATUS_FIT = 5,
  // The exact-match target is at or beyond the curve's asymptote.
  DE_STATUS_UNREACHABLE = 6,
  // The output buffer is too small; the required length was written.
  DE_STATUS_BUFFER_TOO_SMALL = 7,
  DE_STATUS_PANIC = 8,
} DeStatus;

typedef enum DeAlgorithm {
  DE_ALGORITHM_UNIFORM = 0,
  DE_ALGORITHM_SPIS = 1,
} DeAlgorithm;

// Loaded corpus.
typedef struct DeCorpus DeCorpus;

// Fitted or hand-specified curve `h(x) = a / x^b + c`.
typedef struct DeCurveModel DeCurveModel;

// Sampled subset of a corpus domain's train rows.
typedef struct DeSubset DeSubset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL after a
// successful call. Valid until the next call on this thread.
const char *de_last_error(void);

// Writes the `n`-point subset-size schedule into `out[0..n]`.
//
// # Safety
// `out` points to `capacity` writable `u32`s; `written` is writable.
enum DeStatus de_schedule_sizes(size_t n, uint32_t *out, size_t capacity, size_t *written);

// Fits a curve to `len` (subset %, exact match %) pairs.
//
// # Safety
// `xs` and `ys` point to `len` readable doubles; `out` is writable.
enum DeStatus de_curve_fit(const double *xs,
                           const double *ys,
                           size_t len,
                           struct DeCurveModel **out);

// A curve with the given parameters.
//
// # Safety
// `out` is writable.
enum DeStatus de_curve_from_params(double a, double b, double c, struct DeCurveModel **out);

// # Safety
// `model` is a live handle; `a`, `b`, `c` are writable.
enum DeStatus de_curve_params(const struct DeCurveModel *model, double *a, double *b, double *c);

// `h(x)` for `x > 0`, unclamped.
//
// # Safety
// `model` is a live handle; `out` is writable.
enum DeStatus de_curve_evaluate(const struct DeCurveModel *model, double x, double *out);

// Subset % needed for exact match `y`. `exceeds_full_data` is set when the
// answer is above 100.
//
// # Safety
// `model` is a live handle; `out` and `exceeds_full_data` are writable.
enum DeStatus de_curve_invert(const struct DeCurveModel *model,
                              double y,
                              double *out,
                              bool *exceeds_full_data);

// # Safety
// `model` is NULL or a handle not yet freed.
void de_curve_free(struct DeCurveModel *model);

// Percentage of `len` system frames identical to their reference frames.
//
// # Safety
// `system` and `reference` point to `len` NUL-terminated strings; `out` is
// writable.
enum DeStatus de_exact_match(const char *const *system,
                             const char *const *reference,
                             size_t len,
                             double *out);

// Loads a TSV or JSONL corpus file; the format follows the extension.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum DeStatus de_corpus_load(const char *path, struct DeCorpus **out);

// # Safety
// `corpus` is a live handle; `out` is writable.
enum DeStatus de_corpus_len(const struct DeCorpus *corpus, size_t *out);

// # Safety
// `corpus` is NULL or a handle not yet freed, and no subset drawn from it
// is used afterwards.
void de_corpus_free(struct DeCorpus *corpus);

// Draws a subset of `domain`'s train rows. `size` is a percent for
// uniform sampling and samples per label for SPIS.
//
// # Safety
// `corpus` is a live handle; `domain` is a NUL-terminated string; `out` is
// writable.
enum DeStatus de_sample(const struct DeCorpus *corpus,
                        const char *domain,
                        enum DeAlgorithm algorithm,
                        double size,
                        uint64_t seed,
                        struct DeSubset **out);

// Copies the subset's corpus row ids into `out`; `written` receives the
// subset size even when the buffer is too small.
//
// # Safety
// `subset` is a live handle; `out` points to `capacity` writable `size_t`s;
// `written` is writable.
enum DeStatus de_subset_row_ids(const struct DeSubset *subset,
                                size_t *out,
                                size_t capacity,
                                size_t *written);

// Subset as JSON. Release the string with [`de_string_free`].
//
// # Safety
// `subset` is a live handle; `out` is writable.
enum DeStatus de_subset_to_json(const struct DeSubset *subset, char **out);

// # Safety
// `subset` is NULL or a handle not yet freed.
void de_subset_free(struct DeSubset *subset);

// # Safety
// `s` is NULL or a string returned by this library and not yet freed.
void de_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATAEFF_H */
