#ifndef EIGENKIT_H
#define EIGENKIT_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Include the passage in rendered queries.
 */
#define EK_DERIVE_PARAGRAPH 1

/*
 Emit inverse samples.
 */
#define EK_DERIVE_REVERSE 2

/*
 Record hop counts.
 */
#define EK_DERIVE_HOP 4

#define EK_DERIVE_ALL ((EK_DERIVE_PARAGRAPH | EK_DERIVE_REVERSE) | EK_DERIVE_HOP)

typedef enum EkPolarity {
  EK_POLARITY_INCREASING = 0,
  EK_POLARITY_DECREASING = 1,
  EK_POLARITY_NEUTRAL = 2,
} EkPolarity;

typedef enum EkRelation {
  EK_RELATION_HELPS = 0,
  EK_RELATION_HURTS = 1,
  EK_RELATION_HELPED_BY = 2,
  EK_RELATION_HURT_BY = 3,
} EkRelation;

typedef enum EkSplit {
  EK_SPLIT_TRAIN = 0,
  EK_SPLIT_DEV = 1,
  EK_SPLIT_TEST = 2,
} EkSplit;

typedef enum EkStatus {
  EK_STATUS_OK = 0,
  EK_STATUS_NULL_POINTER = 1,
  EK_STATUS_INVALID_UTF8 = 2,
  EK_STATUS_PARSE_ERROR = 3,
  EK_STATUS_INVALID_ARGUMENT = 4,
  EK_STATUS_UNKNOWN_NODE = 5,
  EK_STATUS_INVALID_GRAPH = 6,
  EK_STATUS_METRIC_ERROR = 7,
  EK_STATUS_PANIC = 99,
} EkStatus;

/*
 Opaque influence graph handle.
 */
typedef struct EkGraph EkGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message left by the last call on this thread, or NULL. Set by failures and
 by [`ek_graph_validate`] when it finds errors. Valid until the next library
 call on the same thread; do not free.
 */
const char *ek_last_error(void);

/*
 # Safety
 `s` must be NULL or a string returned by this library that was not freed yet.
 */
void ek_string_free(char *s);

/*
 Parses one graph line (`{"passage_id", "nodes", "edges"}`).

 # Safety
 `json` must be a valid C string; `out` must be valid for writes.
 */
enum EkStatus ek_graph_from_json(const char *json, struct EkGraph **out);

/*
 # Safety
 `graph` must be NULL or a live handle from [`ek_graph_from_json`].
 */
void ek_graph_free(struct EkGraph *graph);

/*
 # Safety
 `graph` must be a live handle; out-pointers must be valid for writes.
 */
enum EkStatus ek_graph_size(const struct EkGraph *graph, size_t *nodes, size_t *edges);

/*
 Counts invariant violations (`errors`) and tolerated findings (`warnings`).

 # Safety
 `graph` must be a live handle; out-pointers must be valid for writes.
 */
enum EkStatus ek_graph_validate(const struct EkGraph *graph, size_t *errors, size_t *warnings);

/*
 Number of simple paths leaving `source_id` with 1..=`max_hop` edges.

 # Safety
 `graph` must be a live handle, `source_id` a valid C string, `count` valid for writes.
 */
enum EkStatus ek_graph_count_paths(const struct EkGraph *graph,
                                   const char *source_id,
                                   uint32_t max_hop,
                                   size_t *count);

/*
 Composes `len` signs given as +1 / -1; writes +1 or -1 to `out`.

 # Safety
 `signs` must point to `len` readable values (may be NULL when `len` is 0).
 */
enum EkStatus ek_compose_signs(const int8_t *signs, size_t len, int8_t *out);

/*
 Inverse relation code, or -1 for an unknown code.
 */
int32_t ek_relation_invert(uint32_t relation);

/*
 Static surface form ("helps", "is hurt by", ...) or NULL. Do not free.
 */
const char *ek_relation_surface(uint32_t relation);

/*
 Renders a model query. `passage` may be NULL (paragraph omitted) and
 `hop` may be 0 (hop clause omitted).

 # Safety
 String arguments must be valid C strings (or NULL where allowed); `out` valid for writes.
 */
enum EkStatus ek_render_query(const char *passage,
                              const char *source,
                              uint32_t relation,
                              uint32_t hop,
                              char **out);

/*
 Derives samples for one graph; writes them as JSON lines to `out`.
 `passage_json` is `{"passage_id", "sentences"}`; `flags` is a bitmask of
 `EK_DERIVE_*`.

 # Safety
 `graph` must be a live handle, `passage_json` a valid C string, `out` valid for writes.
 */
enum EkStatus ek_derive_samples(const struct EkGraph *graph,
                                const char *passage_json,
                                uint32_t max_hop,
                                uint32_t flags,
                                uint32_t split,
                                char **out);

/*
 Sentence BLEU-`max_n` (1..4) of `candidate` against `n_refs` references, in [0, 100].

 # Safety
 `candidate` must be a valid C string, `refs` must point to `n_refs` valid C strings.
 */
enum EkStatus ek_bleu(const char *candidate,
                      const char *const *refs,
                      size_t n_refs,
                      uint32_t max_n,
                      double *out);

/*
 ROUGE-L F-measure in [0, 100].

 # Safety
 Both strings must be valid C strings; `out` valid for writes.
 */
enum EkStatus ek_rouge_l(const char *candidate, const char *reference, double *out);

/*
 Exact-match METEOR in [0, 100].

 # Safety
 Both strings must be valid C strings; `out` valid for writes.
 */
enum EkStatus ek_meteor_simple(const char *candidate, const char *reference, double *out);

/*
 Polarity class of `text` under the default 22-word lexicon.

 # Safety
 `text` must be a valid C string; `out` valid for writes.
 */
enum EkStatus ek_polarity_of(const char *text, enum EkPolarity *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIGENKIT_H */
