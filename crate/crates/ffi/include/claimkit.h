/* C interface for the claimkit patent-claim toolkit. */

#ifndef CLAIMKIT_H
#define CLAIMKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Success.
#define CK_OK 0

// A required pointer argument was null.
#define CK_ERR_NULL_ARGUMENT -1

// A string argument was not valid UTF-8.
#define CK_ERR_INVALID_UTF8 -2

// A flag argument was outside its documented range.
#define CK_ERR_INVALID_FLAG -3

// The claim number does not exist in the set.
#define CK_ERR_UNKNOWN_CLAIM -4

// The metric is undefined for the given input.
#define CK_ERR_METRIC -5

// `ck_classify_claim`: no references to other claims.
#define CK_CATEGORY_INDEPENDENT 0

// `ck_classify_claim`: refers to exactly one claim.
#define CK_CATEGORY_DEPENDENT_SINGLE 1

// `ck_classify_claim`: refers to several claims in the alternative.
#define CK_CATEGORY_DEPENDENT_MULTI 2

// `ck_classify_claim`: multiple dependent claim that depends on another
// multiple dependent claim.
#define CK_CATEGORY_MULTI_MULTI 3

// `ck_parse_claims` style flag: pick the header syntax found in the text.
#define CK_STYLE_AUTO 0

// `ck_parse_claims` style flag: `【請求項N】` headers.
#define CK_STYLE_FULL_WIDTH 1

// `ck_parse_claims` style flag: `[Claim N]` headers.
#define CK_STYLE_ASCII 2

// `ck_rewrite` baseline flag: reproduce the claims unchanged.
#define CK_BASELINE_COPY 0

// `ck_rewrite` baseline flag: delete one random claim (never claim 1)
// together with everything depending on it.
#define CK_BASELINE_RDC 1

// `ck_rewrite` baseline flag: delete every claim multiply dependent on a
// multiple dependent claim, together with everything depending on it.
#define CK_BASELINE_DMMC 2

// `ck_gleu`/`ck_sari` segmentation flag: character/word tokens.
#define CK_SEG_WORD 0

// `ck_gleu`/`ck_sari` segmentation flag: clause-level phrase tokens.
#define CK_SEG_PHRASE 1

// Parsed claim set behind the C interface. Never instantiated from C;
// obtained from `ck_parse_claims` and released with `ck_claimset_free`.
typedef struct ck_claimset ck_claimset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if the last
// call succeeded. The pointer stays valid until the next failing call on
// the same thread; do not free it.
const char *ck_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must have been returned by a `ck_` function that documents caller
// ownership, and must not have been freed already.
void ck_string_free(char *s);

// Parses claim text into a set handle. `style` is one of the `CK_STYLE_*`
// flags. Returns null on failure; the handle must be released with
// `ck_claimset_free`.
//
// # Safety
// `text` must be null or a readable NUL-terminated string.
struct ck_claimset *ck_parse_claims(const char *text, int style);

// Releases a claim-set handle. Null is ignored.
//
// # Safety
// `set` must have come from `ck_parse_claims` and not have been freed
// already.
void ck_claimset_free(struct ck_claimset *set);

// Number of claims in the set; 0 if `set` is null (a parsed set always
// holds at least one claim).
//
// # Safety
// `set` must be null or a live handle from `ck_parse_claims`.
size_t ck_claimset_len(const struct ck_claimset *set);

// Dependency category of claim `number`: one of the `CK_CATEGORY_*` values,
// or a negative error code.
//
// # Safety
// `set` must be null or a live handle from `ck_parse_claims`.
int ck_classify_claim(const struct ck_claimset *set, uint32_t number);

// Renders the set back to claim text in its header style. Returns a string
// owned by the caller (release with `ck_string_free`), or null on failure.
//
// # Safety
// `set` must be null or a live handle from `ck_parse_claims`.
char *ck_serialize_claims(const struct ck_claimset *set);

// Applies a rewriting baseline (a `CK_BASELINE_*` flag; `seed` feeds the
// random choice in `CK_BASELINE_RDC` and is ignored otherwise) and returns
// the rewritten claim text. The string is owned by the caller (release
// with `ck_string_free`); null on failure.
//
// # Safety
// `set` must be null or a live handle from `ck_parse_claims`.
char *ck_rewrite(const struct ck_claimset *set, int baseline, uint64_t seed);

// Sentence-level GLEU (n-grams up to 4) of `hypothesis` against
// `reference` given `source`, under the `CK_SEG_*` segmentation `mode`.
// Writes the score to `out_score` and returns `CK_OK`, or returns a
// negative error code.
//
// # Safety
// The text pointers must be null or readable NUL-terminated strings, and
// `out_score` null or writable.
int ck_gleu(const char *source,
            const char *reference,
            const char *hypothesis,
            int mode,
            double *out_score);

// SARI (n-grams up to 4) of `hypothesis` against `reference` given
// `source`, under the `CK_SEG_*` segmentation `mode`. Writes the score to
// `out_score` and returns `CK_OK`, or returns a negative error code.
//
// # Safety
// The text pointers must be null or readable NUL-terminated strings, and
// `out_score` null or writable.
int ck_sari(const char *source,
            const char *reference,
            const char *hypothesis,
            int mode,
            double *out_score);

// Chat-formatted rewriting prompt for the given claim text and refusal
// reasons (`reasons` is an array of `reasons_len` strings; pass null with
// length 0 for none). The string is owned by the caller (release with
// `ck_string_free`); null on failure.
//
// # Safety
// `claims` must be null or a readable NUL-terminated string; `reasons`
// must be null or point to `reasons_len` readable NUL-terminated strings.
char *ck_build_prompt(const char *claims, const char *const *reasons, size_t reasons_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLAIMKIT_H */
