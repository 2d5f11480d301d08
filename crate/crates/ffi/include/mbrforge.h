#ifndef MBRFORGE_H
#define MBRFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum MbrStatus {
  MBR_STATUS_OK = 0,
  MBR_STATUS_NULL_POINTER = 1,
  MBR_STATUS_INVALID_UTF8 = 2,
  // Misaligned, out-of-range or otherwise unusable input data.
  MBR_STATUS_INVALID_INPUT = 3,
  // A malformed tensor file.
  MBR_STATUS_FORMAT = 4,
  MBR_STATUS_IO = 5,
  // The external scorer failed.
  MBR_STATUS_BRIDGE = 6,
  MBR_STATUS_PANIC = 7,
} MbrStatus;

// Built-in MBR utilities.
typedef enum MbrUtility {
  MBR_UTILITY_CHRF = 0,
  // Sentence BLEU with add-0.1 smoothing on punctuation-split tokens.
  MBR_UTILITY_BLEU = 1,
} MbrUtility;

// Segments collected for MBR selection.
typedef struct MbrCandidates MbrCandidates;

// The outcome of [`mbrforge_mbr_decode`].
typedef struct MbrSelection MbrSelection;

// An in-memory set of named f32 tensors.
typedef struct MbrTensorStore MbrTensorStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *mbrforge_last_error(void);

// Library version as a static string.
const char *mbrforge_version(void);

void mbrforge_string_free(char *s);

// Sentence BLEU (0-100) of `hyp` against one reference, add-0.1 smoothing,
// punctuation-split tokens.
enum MbrStatus mbrforge_sentence_bleu(const char *hyp, const char *reference, double *out);

// Sentence chrF (0-100), character order 6, beta 2.
enum MbrStatus mbrforge_sentence_chrf(const char *hyp, const char *reference, double *out);

// New empty candidate set whose segments each carry `num_systems` (>= 2)
// candidates.
enum MbrStatus mbrforge_candidates_new(size_t num_systems, struct MbrCandidates **out);

// Appends one segment: its source and exactly `num_systems` candidates.
enum MbrStatus mbrforge_candidates_add(struct MbrCandidates *set,
                                       const char *source,
                                       const char *const *candidates,
                                       size_t count);

// Number of segments added so far; 0 for NULL.
size_t mbrforge_candidates_len(const struct MbrCandidates *set);

void mbrforge_candidates_free(struct MbrCandidates *set);

// Selects one candidate per segment. `workers` of 0 is treated as 1.
enum MbrStatus mbrforge_mbr_decode(const struct MbrCandidates *set,
                                   enum MbrUtility utility,
                                   bool include_self,
                                   size_t workers,
                                   struct MbrSelection **out);

// Number of segments in a selection; 0 for NULL.
size_t mbrforge_selection_len(const struct MbrSelection *selection);

// Result for `segment`. Each out-parameter may be NULL. `out_text` borrows
// from the selection and is valid until it is freed.
enum MbrStatus mbrforge_selection_get(const struct MbrSelection *selection,
                                      size_t segment,
                                      size_t *out_index,
                                      double *out_expected_utility,
                                      const char **out_text);

void mbrforge_selection_free(struct MbrSelection *selection);

enum MbrStatus mbrforge_store_load(const char *path, struct MbrTensorStore **out);

// Writes the store atomically.
enum MbrStatus mbrforge_store_save(const struct MbrTensorStore *store, const char *path);

// Number of tensors; 0 for NULL.
size_t mbrforge_store_len(const struct MbrTensorStore *store);

// Borrows the values of tensor `name` (row-major). The pointer is valid
// until the store is freed.
enum MbrStatus mbrforge_store_get(const struct MbrTensorStore *store,
                                  const char *name,
                                  const float **out_data,
                                  size_t *out_len);

// Elementwise mean of `count` stores with identical names and shapes.
enum MbrStatus mbrforge_store_average(const struct MbrTensorStore *const *stores,
                                      size_t count,
                                      struct MbrTensorStore **out);

// Merges an adapter store holding `<name>.lora_A` / `<name>.lora_B` pairs
// into `base` with scale `alpha / rank`.
enum MbrStatus mbrforge_store_lora_merge(const struct MbrTensorStore *base,
                                         const struct MbrTensorStore *adapter,
                                         double alpha,
                                         struct MbrTensorStore **out);

void mbrforge_store_free(struct MbrTensorStore *store);

// Symmetric KL penalty between two distributions of length `len`. With
// `floor` every probability is raised to at least 1e-12 first.
enum MbrStatus mbrforge_rdrop_penalty(const double *p,
                                      const double *q,
                                      size_t len,
                                      bool floor,
                                      double *out);

// `reg_alpha` times [`mbrforge_rdrop_penalty`].
enum MbrStatus mbrforge_rdrop_loss(const double *p,
                                   const double *q,
                                   size_t len,
                                   double reg_alpha,
                                   bool floor,
                                   double *out);

// Streaming-format prompt for turn `turn_index` of document `doc_id` in
// the JSON-lines chat records `chat_jsonl`, with up to `k_history` turns.
enum MbrStatus mbrforge_render_stream(const char *chat_jsonl,
                                      const char *doc_id,
                                      size_t turn_index,
                                      size_t k_history,
                                      char **out_text,
                                      char **out_completion);

// Context-aware prompt over the window `[turn - before, turn + after]`.
enum MbrStatus mbrforge_render_context(const char *chat_jsonl,
                                       const char *doc_id,
                                       size_t turn_index,
                                       size_t before,
                                       size_t after,
                                       bool include_query,
                                       char **out_text,
                                       char **out_completion);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBRFORGE_H */
